// udase: segment / simulate / evaluate / adapt pipelines in one binary.
//
// Exit codes: 0 success, 1 config error, 2 data error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "udase/audio.hpp"
#include "udase/checkpoint.hpp"
#include "udase/metrics.hpp"
#include "udase/remixit.hpp"
#include "udase/segmenter.hpp"
#include "udase/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw udase::AudioError(path.string() + ": cannot write");
  f << text;
}

// Every command drops its fully resolved settings next to its outputs so a
// run can be reproduced from the artifact directory alone.
void echo_config(const fs::path& out_dir, const ordered_json& cfg) {
  write_text(out_dir / "config.json", cfg.dump(2) + "\n");
}

ordered_json segment_to_json(const udase::LabeledSegment& s) {
  ordered_json j;
  j["session_id"] = s.session_id;
  j["start_ms"] = s.start_ms;
  j["end_ms"] = s.end_ms;
  j["max_speakers"] = s.max_speakers;
  return j;
}

int cmd_segment(const std::string& transcripts_dir, const std::string& out_dir,
                double min_duration, bool listening_subset,
                const std::string& patterns_out) {
  std::vector<fs::path> inputs;
  for (const auto& e : fs::directory_iterator(transcripts_dir))
    if (e.is_regular_file() && e.path().extension() == ".json")
      inputs.push_back(e.path());
  std::sort(inputs.begin(), inputs.end());

  std::vector<udase::LabeledSegment> segments;
  std::vector<udase::LabeledSegment> listening;
  std::vector<ordered_json> patterns;
  for (const auto& path : inputs) {
    udase::Transcript t;
    try {
      t = udase::load_transcript(path.string());
    } catch (const udase::TranscriptError& e) {
      std::cerr << path.string() << ": " << e.what() << "\n";
      return kExitData;
    }
    auto tl = udase::build_timeline(t);
    auto segs = udase::extract_segments(tl, min_duration);
    for (const auto& s : segs) {
      segments.push_back(s);
      if (!patterns_out.empty() && s.max_speakers >= 1) {
        auto act = udase::activity_pattern(tl, s);
        ordered_json p;
        p["n"] = s.max_speakers;
        ordered_json speakers = ordered_json::array();
        for (const auto& ivs : act) {
          ordered_json one = ordered_json::array();
          for (const auto& [a, b] : ivs)
            // milliseconds to samples at the pipeline rate
            one.push_back({{"onset", a * 16}, {"offset", b * 16}});
          speakers.push_back(one);
        }
        p["speakers"] = speakers;
        patterns.push_back(p);
      }
    }
    if (listening_subset)
      for (const auto& s : udase::extract_listening_subset(tl))
        listening.push_back(s);
  }

  const fs::path out(out_dir);
  fs::create_directories(out);
  {
    std::ostringstream m;
    for (const auto& s : segments) m << segment_to_json(s).dump() << '\n';
    write_text(out / "segments.jsonl", m.str());
  }
  if (listening_subset) {
    std::ostringstream m;
    for (const auto& s : listening) m << segment_to_json(s).dump() << '\n';
    write_text(out / "listening.jsonl", m.str());
  }
  if (!patterns_out.empty()) {
    std::ostringstream m;
    for (const auto& p : patterns) m << p.dump() << '\n';
    write_text(patterns_out, m.str());
  }

  ordered_json cfg;
  cfg["command"] = "segment";
  cfg["transcripts_dir"] = transcripts_dir;
  cfg["out"] = out_dir;
  cfg["min_duration"] = min_duration;
  cfg["listening_subset"] = listening_subset;
  if (!patterns_out.empty()) cfg["patterns"] = patterns_out;
  echo_config(out, cfg);

  std::cout << "transcripts: " << inputs.size()
            << "  segments: " << segments.size();
  if (listening_subset) std::cout << "  listening: " << listening.size();
  std::cout << "\n";
  return kExitOk;
}

int cmd_simulate(const udase::SimConfig& sim, const std::string& prior_mode) {
  auto summary = udase::simulate_dataset(sim);

  ordered_json cfg;
  cfg["command"] = "simulate";
  cfg["banks"] = sim.banks_index;
  cfg["out"] = sim.out_dir;
  cfg["count"] = sim.count;
  cfg["seed"] = sim.master_seed;
  cfg["prior"] = prior_mode;
  cfg["snr"] = {{"mean_db", sim.snr.mean_db},
                {"sigma1_db", sim.snr.sigma1_db},
                {"sigma2_db", sim.snr.sigma2_db}};
  if (sim.patterns_file) cfg["patterns"] = *sim.patterns_file;
  cfg["jobs"] = sim.jobs;
  echo_config(sim.out_dir, cfg);

  std::cout << "examples: " << summary.count << "\n";
  if (summary.count > 0) {
    for (int n = 1; n <= 3; ++n)
      std::cout << "  p(n=" << n << ") = "
                << static_cast<double>(summary.count_per_n[n]) /
                       static_cast<double>(summary.count)
                << "\n";
    std::cout << "  snr mean = " << summary.snr_mean_db
              << " dB, std = " << summary.snr_std_db << " dB\n";
  }
  std::cout << "manifest: " << summary.manifest_path << "\n";
  return kExitOk;
}

int cmd_evaluate(const std::string& estimates_dir, const std::string& manifest,
                 const std::string& out_dir, int jobs, bool normalize) {
  auto report = udase::evaluate_dataset(estimates_dir, manifest, jobs);

  const fs::path out(out_dir);
  fs::create_directories(out);
  write_text(out / "report.csv", report.to_csv());
  write_text(out / "report.jsonl", report.to_jsonl());

  if (normalize) {
    const fs::path norm_dir = out / "normalized";
    fs::create_directories(norm_dir);
    for (const auto& row : report.rows) {
      if (row.metric != "si_sdr") continue;
      auto w = udase::read_wav(
          (fs::path(estimates_dir) / (row.file_id + ".wav")).string());
      udase::write_wav((norm_dir / (row.file_id + ".wav")).string(),
                       udase::normalize_loudness(w, -30.0),
                       udase::WavEncoding::float32);
    }
  }

  ordered_json cfg;
  cfg["command"] = "evaluate";
  cfg["estimates"] = estimates_dir;
  cfg["manifest"] = manifest;
  cfg["out"] = out_dir;
  cfg["jobs"] = jobs;
  cfg["normalize"] = normalize;
  echo_config(out, cfg);

  std::cout << "scored: " << report.rows.size()
            << "  mean si_sdr: " << report.mean("si_sdr") << " dB\n";
  if (!report.missing_files.empty()) {
    for (const auto& m : report.missing_files)
      std::cerr << "missing estimate: " << m << "\n";
    return kExitData;
  }
  return kExitOk;
}

std::vector<udase::Waveform> load_mixtures(const std::string& manifest_path) {
  std::ifstream f(manifest_path);
  if (!f)
    throw udase::AudioError(manifest_path + ": cannot open manifest");
  const fs::path dir = fs::path(manifest_path).parent_path();
  std::vector<udase::Waveform> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto j = json::parse(line);
    out.push_back(udase::read_wav(
        (dir / j.at("files").at("mixture").get<std::string>()).string()));
  }
  return out;
}

int cmd_adapt(const std::string& config_path, std::optional<bool> vad_flag,
              std::optional<uint64_t> seed_flag,
              const std::string& out_override) {
  ordered_json cfg;
  {
    std::ifstream f(config_path);
    if (!f) {
      std::cerr << config_path << ": cannot open config\n";
      return kExitConfig;
    }
    try {
      cfg = ordered_json::parse(f);
    } catch (const json::exception& e) {
      std::cerr << config_path << ": " << e.what() << "\n";
      return kExitConfig;
    }
  }

  std::string out_dir;
  udase::AdaptConfig ac;
  int bands = 32;
  double initial_logit = 0.0;
  std::string teacher_ckpt, pretrain_manifest, unlabeled_manifest,
      dev_manifest;
  int pre_epochs = 0, pre_batch = 8;
  double pre_lr = 0.5;
  try {
    out_dir = out_override.empty() ? cfg.at("out_dir").get<std::string>()
                                   : out_override;
    if (cfg.contains("enhancer")) {
      bands = cfg["enhancer"].value("bands", 32);
      initial_logit = cfg["enhancer"].value("initial_logit", 0.0);
    }
    if (cfg.contains("teacher_checkpoint"))
      teacher_ckpt = cfg["teacher_checkpoint"].get<std::string>();
    if (cfg.contains("pretrain")) {
      const auto& p = cfg["pretrain"];
      pretrain_manifest = p.at("manifest").get<std::string>();
      pre_epochs = p.value("epochs", 5);
      pre_lr = p.value("learning_rate", 0.5);
      pre_batch = p.value("batch_size", 8);
    }
    const auto& a = cfg.at("adapt");
    unlabeled_manifest = a.at("unlabeled_manifest").get<std::string>();
    dev_manifest = a.at("dev_manifest").get<std::string>();
    ac.epochs = a.value("epochs", 10);
    ac.batch_size = a.value("batch_size", 8);
    ac.learning_rate = a.value("learning_rate", 0.5);
    ac.ema.gamma = a.value("gamma", 0.99);
    ac.ema.update_every = a.value("update_every", 1);
    ac.vad_filter = a.value("vad_filter", false);
    if (a.contains("vad")) {
      ac.vad.frame_ms = a["vad"].value("frame_ms", ac.vad.frame_ms);
      ac.vad.threshold_db = a["vad"].value("threshold_db", ac.vad.threshold_db);
      ac.vad.min_quiet_fraction =
          a["vad"].value("min_quiet_fraction", ac.vad.min_quiet_fraction);
    }
    ac.seed = a.value("seed", uint64_t{0});
  } catch (const json::exception& e) {
    std::cerr << config_path << ": " << e.what() << "\n";
    return kExitConfig;
  }
  if (vad_flag) ac.vad_filter = *vad_flag;
  if (seed_flag) ac.seed = *seed_flag;
  if (ac.batch_size < 2) {
    std::cerr << "adapt.batch_size must be >= 2\n";
    return kExitConfig;
  }
  if (teacher_ckpt.empty() && pretrain_manifest.empty()) {
    std::cerr << "either teacher_checkpoint or pretrain must be given\n";
    return kExitConfig;
  }

  const fs::path out(out_dir);
  fs::create_directories(out);

  // Teacher: either restored from a checkpoint or trained supervised.
  std::unique_ptr<udase::Enhancer> teacher;
  if (!teacher_ckpt.empty()) {
    auto ck = udase::load_checkpoint(teacher_ckpt);
    teacher = udase::make_enhancer(ck);
  } else {
    teacher = std::make_unique<udase::GainEnhancer>(bands, initial_logit);
    auto data = udase::load_labeled_manifest(pretrain_manifest);
    udase::pretrain(*teacher, data, pre_epochs, pre_lr, pre_batch, ac.seed);
  }

  auto dev = udase::load_labeled_manifest(dev_manifest);
  const double teacher_dev = udase::dev_si_sdr(*teacher, dev);
  {
    udase::Checkpoint ck;
    ck.bands = bands;
    ck.theta = teacher->params();
    ck.epoch = -1;
    ck.dev_score = teacher_dev;
    udase::save_checkpoint((out / "teacher.json").string(), ck);
  }

  auto unlabeled = load_mixtures(unlabeled_manifest);
  auto result = udase::adapt(ac, *teacher, unlabeled, dev);

  {
    udase::Checkpoint ck;
    ck.bands = bands;
    ck.theta = result.best_params;
    ck.epoch = result.best_epoch;
    ck.dev_score = result.best_dev_si_sdr;
    udase::save_checkpoint((out / "best.json").string(), ck);
  }
  {
    std::ostringstream log;
    ordered_json head;
    head["teacher_dev_si_sdr"] = teacher_dev;
    head["unlabeled_total"] = unlabeled.size();
    head["training_segments"] = result.training_segments;
    head["filtered_out"] = result.filtered_out;
    log << head.dump() << '\n';
    for (const auto& e : result.log) {
      ordered_json j;
      j["epoch"] = e.epoch;
      j["mean_loss"] = e.mean_loss;
      j["dev_si_sdr"] = e.dev_si_sdr;
      j["teacher_student_distance"] = e.teacher_student_distance;
      log << j.dump() << '\n';
    }
    write_text(out / "log.jsonl", log.str());
  }

  ordered_json echo = cfg;
  echo["command"] = "adapt";
  echo["out_dir"] = out_dir;
  echo["adapt"]["vad_filter"] = ac.vad_filter;
  echo["adapt"]["seed"] = ac.seed;
  echo_config(out, echo);

  std::cout << "teacher dev si_sdr: " << teacher_dev << " dB\n"
            << "best epoch: " << result.best_epoch
            << "  best dev si_sdr: " << result.best_dev_si_sdr << " dB\n"
            << "training segments: " << result.training_segments
            << " (filtered out " << result.filtered_out << ")\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CHiME-style segmentation, simulation, evaluation and "
               "RemixIT adaptation"};
  app.require_subcommand(1);

  // segment
  std::string seg_dir, seg_out, seg_patterns;
  double seg_min_dur = 3.0;
  bool seg_listening = false;
  auto* seg = app.add_subcommand("segment",
                                 "Extract speaker-count labeled segments");
  seg->add_option("transcripts_dir", seg_dir, "Directory of transcript JSONs")
      ->required();
  seg->add_option("--out", seg_out, "Output directory")->required();
  seg->add_option("--min-duration", seg_min_dur, "Minimum segment seconds");
  seg->add_flag("--listening-subset", seg_listening,
                "Also extract the 4-5 s listening-test subset");
  seg->add_option("--patterns", seg_patterns,
                  "Write speaker activity patterns to this JSONL file");

  // simulate
  udase::SimConfig sim;
  std::string sim_prior = "eval";
  std::string sim_patterns;
  auto* sml = app.add_subcommand("simulate", "Generate noisy mixtures");
  sml->add_option("banks", sim.banks_index, "Asset bank index JSON")
      ->required();
  sml->add_option("--out", sim.out_dir, "Output directory")->required();
  sml->add_option("--count", sim.count, "Number of mixtures")->required();
  sml->add_option("--seed", sim.master_seed, "Master random seed");
  sml->add_option("--prior", sim_prior, "Speaker-count prior")
      ->check(CLI::IsMember({"eval", "train"}));
  sml->add_option("--patterns", sim_patterns,
                  "Activity patterns JSONL from `segment`");
  sml->add_option("--jobs", sim.jobs, "Worker threads")
      ->check(CLI::PositiveNumber);

  // evaluate
  std::string ev_estimates, ev_manifest, ev_out;
  int ev_jobs = 1;
  bool ev_normalize = false;
  auto* ev = app.add_subcommand("evaluate", "Score estimates with SI-SDR");
  ev->add_option("estimates_dir", ev_estimates, "Directory of <id>.wav files")
      ->required();
  ev->add_option("manifest", ev_manifest, "Dataset manifest JSONL")
      ->required();
  ev->add_option("--out", ev_out, "Output directory")->required();
  ev->add_option("--jobs", ev_jobs, "Worker threads")
      ->check(CLI::PositiveNumber);
  ev->add_flag("--normalize", ev_normalize,
               "Export -30 LUFS normalized copies");

  // adapt
  std::string ad_config, ad_out;
  bool ad_vad = false, ad_no_vad = false;
  uint64_t ad_seed = 0;
  auto* ad = app.add_subcommand("adapt", "RemixIT domain adaptation");
  ad->add_option("config", ad_config, "Adaptation config JSON")->required();
  auto* vad_opt = ad->add_flag("--vad", ad_vad, "Enable the energy-VAD filter");
  auto* no_vad_opt =
      ad->add_flag("--no-vad", ad_no_vad, "Disable the energy-VAD filter");
  auto* seed_opt = ad->add_option("--seed", ad_seed, "Override config seed");
  ad->add_option("--out", ad_out, "Override config output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*seg)
      return cmd_segment(seg_dir, seg_out, seg_min_dur, seg_listening,
                         seg_patterns);
    if (*sml) {
      sim.prior = sim_prior == "train" ? udase::train_prior()
                                       : udase::eval_prior();
      if (!sim_patterns.empty()) sim.patterns_file = sim_patterns;
      return cmd_simulate(sim, sim_prior);
    }
    if (*ev)
      return cmd_evaluate(ev_estimates, ev_manifest, ev_out, ev_jobs,
                          ev_normalize);
    if (*ad) {
      std::optional<bool> vad;
      if (vad_opt->count()) vad = true;
      if (no_vad_opt->count()) vad = false;
      std::optional<uint64_t> seed;
      if (seed_opt->count()) seed = ad_seed;
      return cmd_adapt(ad_config, vad, seed, ad_out);
    }
  } catch (const udase::TranscriptError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const udase::AudioError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
