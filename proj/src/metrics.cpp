#include "udase/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace udase {

SiSdrResult si_sdr(const Waveform& estimate, const Waveform& reference) {
  if (estimate.size() != reference.size())
    throw AudioError("si_sdr: length mismatch (" +
                     std::to_string(estimate.size()) + " vs " +
                     std::to_string(reference.size()) + ")");
  const double ref_energy = energy(reference);
  if (ref_energy <= 0.0) throw AudioError("si_sdr: zero-energy reference");

  double dot = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i)
    dot += estimate.samples[i] * reference.samples[i];
  const double alpha = dot / ref_energy;
  const double target_energy = alpha * alpha * ref_energy;

  double err_energy = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    double e = estimate.samples[i] - alpha * reference.samples[i];
    err_energy += e * e;
  }

  SiSdrResult r;
  if (err_energy < 1e-12 * target_energy) {
    r.value_db = kSiSdrCapDb;
    r.capped = true;
    return r;
  }
  if (target_energy < 1e-12 * err_energy) {
    r.value_db = -kSiSdrCapDb;
    r.capped = true;
    return r;
  }
  r.value_db = 10.0 * std::log10(target_energy / err_energy);
  if (r.value_db > kSiSdrCapDb) {
    r.value_db = kSiSdrCapDb;
    r.capped = true;
  } else if (r.value_db < -kSiSdrCapDb) {
    r.value_db = -kSiSdrCapDb;
    r.capped = true;
  }
  return r;
}

double neg_si_sdr_loss(const Waveform& speech_est, const Waveform& noise_est,
                       const Waveform& speech_ref, const Waveform& noise_ref) {
  const double a = std::clamp(si_sdr(speech_est, speech_ref).value_db,
                              -kSiSdrCapDb, kSiSdrCapDb);
  const double b = std::clamp(si_sdr(noise_est, noise_ref).value_db,
                              -kSiSdrCapDb, kSiSdrCapDb);
  return -0.5 * (a + b);
}

double ScoreReport::mean(const std::string& metric) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows)
    if (r.metric == metric) {
      sum += r.value;
      ++n;
    }
  return n ? sum / static_cast<double>(n)
           : std::numeric_limits<double>::quiet_NaN();
}

double ScoreReport::mean_for_count(const std::string& metric, int n) const {
  double sum = 0.0;
  std::size_t k = 0;
  for (const auto& r : rows)
    if (r.metric == metric && r.speaker_count == n) {
      sum += r.value;
      ++k;
    }
  return k ? sum / static_cast<double>(k)
           : std::numeric_limits<double>::quiet_NaN();
}

namespace {

std::string format_value(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

}  // namespace

std::string ScoreReport::to_csv() const {
  std::ostringstream ss;
  ss << "file_id,metric,value\n";
  for (const auto& r : rows)
    ss << r.file_id << ',' << r.metric << ',' << format_value(r.value) << '\n';
  return ss.str();
}

std::string ScoreReport::to_jsonl() const {
  std::ostringstream ss;
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["file_id"] = r.file_id;
    j["metric"] = r.metric;
    j["value"] = r.value;
    j["speaker_count"] = r.speaker_count;
    ss << j.dump() << '\n';
  }
  return ss.str();
}

ScoreReport evaluate_dataset(const std::string& estimates_dir,
                             const std::string& manifest_path, int jobs) {
  namespace fs = std::filesystem;
  std::ifstream f(manifest_path);
  if (!f) throw AudioError(manifest_path + ": cannot open manifest");
  const fs::path manifest_dir = fs::path(manifest_path).parent_path();

  struct Item {
    std::string id;
    int n = 0;
    std::string ref_path;
    std::string est_path;
  };
  std::vector<Item> items;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    Item it;
    it.id = j.at("id").get<std::string>();
    it.n = j.at("n").get<int>();
    it.ref_path =
        (manifest_dir / j.at("files").at("speech_sum").get<std::string>())
            .string();
    it.est_path = (fs::path(estimates_dir) / (it.id + ".wav")).string();
    items.push_back(std::move(it));
  }

  ScoreReport report;
  std::vector<std::optional<ScoreRow>> slots(items.size());
  std::vector<std::optional<std::string>> missing(items.size());

  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < items.size(); i += stride) {
      const Item& it = items[i];
      if (!fs::exists(it.est_path)) {
        missing[i] = it.est_path;
        continue;
      }
      Waveform est = read_wav(it.est_path);
      Waveform ref = read_wav(it.ref_path);
      slots[i] = ScoreRow{it.id, "si_sdr", si_sdr(est, ref).value_db, it.n};
    }
  };
  const int nthreads = std::max(1, jobs);
  if (nthreads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t)
      pool.emplace_back(work, static_cast<std::size_t>(t), nthreads);
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (slots[i]) report.rows.push_back(*slots[i]);
    if (missing[i]) report.missing_files.push_back(*missing[i]);
  }
  return report;
}

}  // namespace udase
