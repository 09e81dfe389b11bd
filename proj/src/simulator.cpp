#include "udase/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace udase {

namespace fs = std::filesystem;

namespace {

std::string join(const std::string& root, const std::string& rel) {
  return (fs::path(root) / rel).string();
}

std::string example_id(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "ex%06zu", index);
  return buf;
}

}  // namespace

Banks load_banks(const std::string& index_path) {
  std::ifstream f(index_path);
  if (!f) throw AudioError(index_path + ": cannot open bank index");
  nlohmann::json j;
  f >> j;

  Banks banks;
  banks.root = fs::path(index_path).parent_path().string();
  for (const auto& e : j.at("speech")) {
    SpeechEntry s;
    s.speaker = e.at("speaker").get<std::string>();
    s.path = e.at("path").get<std::string>();
    s.frames = wav_info(join(banks.root, s.path)).frames;
    banks.speech.push_back(std::move(s));
  }
  for (const auto& e : j.at("noise")) {
    NoiseEntry n;
    n.path = e.at("path").get<std::string>();
    n.frames = wav_info(join(banks.root, n.path)).frames;
    banks.noise.push_back(std::move(n));
  }
  for (const auto& h : j.at("rirs").at("homes")) {
    RirHome home;
    home.name = h.at("name").get<std::string>();
    for (const auto& r : h.at("rooms")) {
      RirRoom room;
      room.name = r.at("name").get<std::string>();
      for (const auto& a : r.at("arrays")) {
        RirArrayConfig arr;
        arr.name = a.at("name").get<std::string>();
        for (const auto& p : a.at("positions")) {
          RirPosition pos;
          pos.name = p.at("name").get<std::string>();
          for (const auto& c : p.at("channels"))
            pos.channel_paths.push_back(c.get<std::string>());
          arr.positions.push_back(std::move(pos));
        }
        room.arrays.push_back(std::move(arr));
      }
      home.rooms.push_back(std::move(room));
    }
    banks.rirs.homes.push_back(std::move(home));
  }
  return banks;
}

std::vector<ActivityPattern> load_activity_patterns(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw AudioError(path + ": cannot open activity patterns");
  std::vector<ActivityPattern> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    ActivityPattern p;
    p.n = j.at("n").get<int>();
    for (const auto& spk : j.at("speakers")) {
      std::vector<ActivityInterval> ivs;
      for (const auto& iv : spk)
        ivs.push_back({iv.at("onset").get<std::size_t>(),
                       iv.at("offset").get<std::size_t>()});
      p.speakers.push_back(std::move(ivs));
    }
    out.push_back(std::move(p));
  }
  return out;
}

int sample_speaker_count(const SpeakerCountPrior& prior, Rng& rng) {
  const double u = rng.uniform();
  if (u < prior.p1) return 1;
  if (u < prior.p1 + prior.p2) return 2;
  return 3;
}

RirSelection sample_rirs(const RirBank& bank, int n, Rng& rng) {
  if (bank.homes.empty()) throw AudioError("sample_rirs: empty RIR bank");
  RirSelection sel;
  sel.home = rng.uniform_index(bank.homes.size());
  const auto& home = bank.homes[sel.home];
  sel.room = rng.uniform_index(home.rooms.size());
  const auto& room = home.rooms[sel.room];
  sel.array_config = rng.uniform_index(room.arrays.size());
  const auto& arr = room.arrays[sel.array_config];
  if (arr.positions.size() < static_cast<std::size_t>(n))
    throw AudioError("sample_rirs: only " +
                     std::to_string(arr.positions.size()) +
                     " speaker positions for n=" + std::to_string(n));
  // Without replacement, in sampling order.
  std::vector<std::size_t> pool(arr.positions.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  for (int i = 0; i < n; ++i) {
    std::size_t k = rng.uniform_index(pool.size());
    sel.positions.push_back(pool[k]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(k));
  }
  sel.channel = rng.uniform_index(arr.positions[sel.positions[0]]
                                      .channel_paths.size());
  return sel;
}

std::pair<double, std::vector<double>> sample_snrs(const SnrSamplerConfig& cfg,
                                                   int n, Rng& rng) {
  const double x = rng.normal(cfg.mean_db, cfg.sigma1_db);
  std::vector<double> y(static_cast<std::size_t>(n));
  for (auto& yi : y) yi = rng.normal(x, cfg.sigma2_db);
  return {x, y};
}

double measure_snr(const Waveform& speech, const Waveform& noise) {
  if (speech.size() != noise.size() || speech.sample_rate != noise.sample_rate)
    throw AudioError("measure_snr: length or sample-rate mismatch");
  const double en = energy(noise);
  if (en <= 0.0) throw AudioError("measure_snr: zero-energy noise");
  const double es = energy(speech);
  if (es <= 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(es / en);
}

namespace {

std::vector<ActivityInterval> synth_activity(std::size_t length, int speaker,
                                             Rng& rng) {
  if (speaker == 0) return {{0, length}};
  const std::size_t onset =
      static_cast<std::size_t>(rng.uniform() * 0.5 * double(length));
  const std::size_t span =
      static_cast<std::size_t>((0.4 + 0.4 * rng.uniform()) * double(length));
  return {{onset, std::min(length, onset + span)}};
}

}  // namespace

MixtureSpec sample_mixture_spec(const SimConfig& cfg, const Banks& banks,
                                const std::vector<ActivityPattern>& patterns,
                                std::size_t index) {
  Rng rng = Rng::child(cfg.master_seed, index);
  MixtureSpec spec;
  spec.id = example_id(index);
  spec.seed = cfg.master_seed;
  spec.n = sample_speaker_count(cfg.prior, rng);
  spec.rir = sample_rirs(banks.rirs, spec.n, rng);
  if (banks.noise.empty()) throw AudioError("empty noise bank");
  spec.noise_index = rng.uniform_index(banks.noise.size());
  const std::size_t length = banks.noise[spec.noise_index].frames;

  auto [x, y] = sample_snrs(cfg.snr, spec.n, rng);
  spec.global_snr_db = x;

  // Activity: sample a matching transcript-derived pattern when available,
  // otherwise synthesize one interval per speaker.
  std::vector<std::vector<ActivityInterval>> activity;
  std::vector<const ActivityPattern*> matching;
  for (const auto& p : patterns)
    if (p.n == spec.n) matching.push_back(&p);
  if (!matching.empty()) {
    const auto& p = *matching[rng.uniform_index(matching.size())];
    for (const auto& spk : p.speakers) {
      std::vector<ActivityInterval> ivs;
      for (const auto& iv : spk) {
        ActivityInterval c{std::min(iv.onset, length),
                           std::min(iv.offset, length)};
        if (c.onset < c.offset) ivs.push_back(c);
      }
      if (!ivs.empty()) activity.push_back(std::move(ivs));
      if (activity.size() == static_cast<std::size_t>(spec.n)) break;
    }
  }
  while (activity.size() < static_cast<std::size_t>(spec.n))
    activity.push_back(
        synth_activity(length, static_cast<int>(activity.size()), rng));

  // Distinct source speakers when the bank allows it.
  std::map<std::string, std::vector<std::size_t>> by_speaker;
  for (std::size_t i = 0; i < banks.speech.size(); ++i)
    by_speaker[banks.speech[i].speaker].push_back(i);
  if (by_speaker.empty()) throw AudioError("empty speech bank");
  std::vector<std::string> speaker_ids;
  for (const auto& [id, _] : by_speaker) speaker_ids.push_back(id);

  std::vector<std::size_t> pool(speaker_ids.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  for (int i = 0; i < spec.n; ++i) {
    std::string chosen;
    if (!pool.empty()) {
      std::size_t k = rng.uniform_index(pool.size());
      chosen = speaker_ids[pool[k]];
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(k));
    } else {
      chosen = speaker_ids[rng.uniform_index(speaker_ids.size())];
    }
    SpeakerSpec sp;
    sp.speaker_id = chosen;
    sp.activity = activity[static_cast<std::size_t>(i)];
    sp.snr_db = y[static_cast<std::size_t>(i)];
    const auto& utts = by_speaker[chosen];
    for (const auto& iv : sp.activity) {
      std::size_t needed = iv.offset - iv.onset;
      std::size_t have = 0;
      while (have < needed) {
        std::size_t u = utts[rng.uniform_index(utts.size())];
        sp.utterances.push_back(u);
        have += banks.speech[u].frames;
        if (banks.speech[u].frames == 0)
          throw AudioError("zero-length speech asset: " +
                           banks.speech[u].path);
      }
    }
    spec.speakers.push_back(std::move(sp));
  }
  return spec;
}

MixtureExample assemble_mixture(const MixtureSpec& spec, const Banks& banks) {
  const Waveform noise =
      read_wav(join(banks.root, banks.noise[spec.noise_index].path));
  const std::size_t length = noise.size();

  MixtureExample ex;
  ex.spec = spec;
  ex.noise_ref = noise;
  const double noise_energy = energy(noise);
  if (noise_energy <= 0.0) throw AudioError("zero-energy noise segment");

  const auto& arr = banks.rirs.homes[spec.rir.home]
                        .rooms[spec.rir.room]
                        .arrays[spec.rir.array_config];

  std::size_t utt_cursor = 0;
  for (std::size_t s = 0; s < spec.speakers.size(); ++s) {
    const auto& sp = spec.speakers[s];
    Waveform dry;
    dry.sample_rate = noise.sample_rate;
    dry.samples.assign(length, 0.0);
    utt_cursor = 0;
    for (const auto& iv : sp.activity) {
      const std::size_t needed = iv.offset - iv.onset;
      std::size_t filled = 0;
      while (filled < needed) {
        if (utt_cursor >= sp.utterances.size())
          throw AudioError("mixture " + spec.id +
                           ": utterance list exhausted before activity "
                           "interval was filled");
        Waveform utt = read_wav(
            join(banks.root, banks.speech[sp.utterances[utt_cursor]].path));
        if (utt.sample_rate != noise.sample_rate)
          throw AudioError("sample-rate mismatch in speech bank");
        ++utt_cursor;
        const std::size_t take = std::min(needed - filled, utt.size());
        for (std::size_t k = 0; k < take; ++k)
          dry.samples[iv.onset + filled + k] = utt.samples[k];
        filled += take;
      }
    }

    const auto& pos = arr.positions[spec.rir.positions[s]];
    Waveform rir = read_wav(join(banks.root,
                                 pos.channel_paths[spec.rir.channel]));
    Waveform rev = convolve(dry, rir);
    rev.samples.resize(length);  // truncate the convolution tail

    const double es = energy(rev);
    if (es <= 0.0)
      throw AudioError("mixture " + spec.id +
                       ": zero-energy speech after placement");
    const double gain =
        std::sqrt(noise_energy / es * std::pow(10.0, sp.snr_db / 10.0));
    for (double& v : rev.samples) v *= gain;
    ex.speech_refs.push_back(std::move(rev));
  }

  ex.speech_sum_ref.sample_rate = noise.sample_rate;
  ex.speech_sum_ref.samples.assign(length, 0.0);
  for (const auto& ref : ex.speech_refs)
    for (std::size_t k = 0; k < length; ++k)
      ex.speech_sum_ref.samples[k] += ref.samples[k];

  ex.mixture.sample_rate = noise.sample_rate;
  ex.mixture.samples.assign(length, 0.0);
  for (std::size_t k = 0; k < length; ++k)
    ex.mixture.samples[k] = ex.speech_sum_ref.samples[k] + noise.samples[k];
  return ex;
}

namespace {

nlohmann::ordered_json spec_to_json(const MixtureSpec& spec,
                                    const Banks& banks) {
  nlohmann::ordered_json j;
  j["id"] = spec.id;
  j["n"] = spec.n;
  j["seed"] = spec.seed;
  j["global_snr_db"] = spec.global_snr_db;
  const auto& home = banks.rirs.homes[spec.rir.home];
  const auto& room = home.rooms[spec.rir.room];
  const auto& arr = room.arrays[spec.rir.array_config];
  nlohmann::ordered_json rir;
  rir["home"] = home.name;
  rir["room"] = room.name;
  rir["array"] = arr.name;
  {
    std::vector<std::string> names;
    for (auto p : spec.rir.positions) names.push_back(arr.positions[p].name);
    rir["positions"] = names;
  }
  rir["channel"] = spec.rir.channel;
  j["rir"] = rir;
  j["noise"] = banks.noise[spec.noise_index].path;
  nlohmann::ordered_json speakers = nlohmann::ordered_json::array();
  for (const auto& sp : spec.speakers) {
    nlohmann::ordered_json s;
    s["speaker"] = sp.speaker_id;
    s["snr_db"] = sp.snr_db;
    std::vector<std::string> utts;
    for (auto u : sp.utterances) utts.push_back(banks.speech[u].path);
    s["utterances"] = utts;
    nlohmann::ordered_json acts = nlohmann::ordered_json::array();
    for (const auto& iv : sp.activity)
      acts.push_back({{"onset", iv.onset}, {"offset", iv.offset}});
    s["activity"] = acts;
    speakers.push_back(s);
  }
  j["speakers"] = speakers;
  return j;
}

}  // namespace

SimSummary simulate_dataset(
    const SimConfig& cfg,
    const std::function<void(const MixtureExample&)>& observer) {
  Banks banks = load_banks(cfg.banks_index);
  std::vector<ActivityPattern> patterns;
  if (cfg.patterns_file)
    patterns = load_activity_patterns(*cfg.patterns_file);

  fs::create_directories(cfg.out_dir);
  const fs::path out_dir(cfg.out_dir);
  fs::create_directories(out_dir / "audio");

  SimSummary summary;
  summary.count = cfg.count;
  summary.count_per_n.assign(4, 0);
  std::vector<std::string> manifest_lines(cfg.count);
  std::vector<double> all_snrs;
  std::mutex mu;

  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < cfg.count; i += stride) {
      MixtureSpec spec = sample_mixture_spec(cfg, banks, patterns, i);
      MixtureExample ex = assemble_mixture(spec, banks);

      nlohmann::ordered_json row = spec_to_json(spec, banks);
      nlohmann::ordered_json files;
      files["mixture"] = "audio/" + spec.id + ".mix.wav";
      files["speech_sum"] = "audio/" + spec.id + ".speech.wav";
      files["noise"] = "audio/" + spec.id + ".noise.wav";
      std::vector<std::string> spk_files;
      for (std::size_t s = 0; s < ex.speech_refs.size(); ++s)
        spk_files.push_back("audio/" + spec.id + ".spk" + std::to_string(s) +
                            ".wav");
      files["speech"] = spk_files;
      row["files"] = files;
      manifest_lines[i] = row.dump();

      if (cfg.write_audio) {
        write_wav((out_dir / files["mixture"].get<std::string>()).string(),
                  ex.mixture);
        write_wav((out_dir / files["speech_sum"].get<std::string>()).string(),
                  ex.speech_sum_ref);
        write_wav((out_dir / files["noise"].get<std::string>()).string(),
                  ex.noise_ref);
        for (std::size_t s = 0; s < ex.speech_refs.size(); ++s)
          write_wav((out_dir / spk_files[s]).string(), ex.speech_refs[s]);
      }
      {
        std::lock_guard<std::mutex> lock(mu);
        ++summary.count_per_n[static_cast<std::size_t>(spec.n)];
        for (const auto& sp : spec.speakers) all_snrs.push_back(sp.snr_db);
        if (observer) observer(ex);
      }
    }
  };
  const int nthreads = std::max(1, cfg.jobs);
  if (nthreads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t)
      pool.emplace_back(work, static_cast<std::size_t>(t), nthreads);
    for (auto& th : pool) th.join();
  }

  summary.manifest_path = (out_dir / "manifest.jsonl").string();
  std::ofstream mf(summary.manifest_path, std::ios::binary);
  if (!mf) throw AudioError(summary.manifest_path + ": cannot write manifest");
  for (const auto& line : manifest_lines) mf << line << '\n';

  if (!all_snrs.empty()) {
    double mean = 0.0;
    for (double v : all_snrs) mean += v;
    mean /= static_cast<double>(all_snrs.size());
    double var = 0.0;
    for (double v : all_snrs) var += (v - mean) * (v - mean);
    var /= static_cast<double>(all_snrs.size());
    summary.snr_mean_db = mean;
    summary.snr_std_db = std::sqrt(var);
  }
  return summary;
}

}  // namespace udase
