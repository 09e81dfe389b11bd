#include "udase/remixit.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "udase/metrics.hpp"
#include "udase/rng.hpp"

namespace udase {

PseudoLabels teacher_infer(const Enhancer& teacher,
                           const std::vector<Waveform>& batch) {
  if (batch.empty()) throw std::invalid_argument("teacher_infer: empty batch");
  PseudoLabels out;
  out.reserve(batch.size());
  for (const auto& mix : batch) out.push_back(teacher.enhance(mix));
  return out;
}

std::vector<std::size_t> cyclic_permutation(std::size_t n) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = (i + 1) % n;
  return p;
}

void crop_to_common_length(PseudoLabels& pseudo) {
  std::size_t min_len = SIZE_MAX;
  for (const auto& [s, nz] : pseudo) min_len = std::min(min_len, s.size());
  for (auto& [s, nz] : pseudo) {
    s.samples.resize(min_len);
    nz.samples.resize(min_len);
  }
}

std::vector<Waveform> remix(const PseudoLabels& pseudo,
                            const std::vector<std::size_t>& permutation) {
  if (pseudo.size() != permutation.size())
    throw std::invalid_argument("remix: permutation size mismatch");
  if (pseudo.size() >= 2)
    for (std::size_t i = 0; i < permutation.size(); ++i)
      if (permutation[i] == i)
        throw std::invalid_argument("remix: permutation has a fixed point");
  const std::size_t len = pseudo.empty() ? 0 : pseudo.front().first.size();
  std::vector<Waveform> out;
  out.reserve(pseudo.size());
  for (std::size_t i = 0; i < pseudo.size(); ++i) {
    const Waveform& s = pseudo[i].first;
    const Waveform& nz = pseudo[permutation[i]].second;
    if (s.size() != len || nz.size() != len)
      throw std::invalid_argument("remix: length mismatch within batch");
    Waveform m;
    m.sample_rate = s.sample_rate;
    m.samples.resize(len);
    for (std::size_t k = 0; k < len; ++k)
      m.samples[k] = s.samples[k] + nz.samples[k];
    out.push_back(std::move(m));
  }
  return out;
}

double batch_loss(const Enhancer& enhancer,
                  const std::vector<Waveform>& bootstrapped,
                  const PseudoLabels& targets) {
  double loss = 0.0;
  for (std::size_t i = 0; i < bootstrapped.size(); ++i) {
    auto [s, nz] = enhancer.enhance(bootstrapped[i]);
    loss += neg_si_sdr_loss(s, nz, targets[i].first, targets[i].second);
  }
  return loss / static_cast<double>(bootstrapped.size());
}

double student_step(Enhancer& student,
                    const std::vector<Waveform>& bootstrapped,
                    const PseudoLabels& targets, double learning_rate) {
  if (bootstrapped.empty() || bootstrapped.size() != targets.size())
    throw std::invalid_argument("student_step: bad batch");
  if (learning_rate < 0.0)
    throw std::invalid_argument("student_step: negative learning rate");

  const double loss = batch_loss(student, bootstrapped, targets);
  if (!std::isfinite(loss))
    throw std::runtime_error("student_step: non-finite batch loss");

  std::vector<double> theta = student.params();
  std::vector<double> grad(theta.size(), 0.0);
  bool have_analytic = true;
  for (std::size_t i = 0; i < bootstrapped.size(); ++i) {
    auto g = student.loss_gradient(bootstrapped[i], targets[i].first,
                                   targets[i].second);
    if (!g) {
      have_analytic = false;
      break;
    }
    for (std::size_t d = 0; d < grad.size(); ++d) grad[d] += (*g)[d];
  }
  if (have_analytic) {
    for (double& g : grad) g /= static_cast<double>(bootstrapped.size());
  } else {
    const double h = 1e-4;
    for (std::size_t d = 0; d < theta.size(); ++d) {
      std::vector<double> t = theta;
      t[d] = theta[d] + h;
      student.set_params(t);
      const double lp = batch_loss(student, bootstrapped, targets);
      t[d] = theta[d] - h;
      student.set_params(t);
      const double lm = batch_loss(student, bootstrapped, targets);
      grad[d] = (lp - lm) / (2.0 * h);
    }
    student.set_params(theta);
  }

  for (std::size_t d = 0; d < theta.size(); ++d)
    theta[d] -= learning_rate * grad[d];
  for (double v : theta)
    if (!std::isfinite(v))
      throw std::runtime_error("student_step: non-finite parameters");
  student.set_params(theta);
  return loss;
}

void ema_update(std::vector<double>& teacher_params,
                const std::vector<double>& student_params, double gamma) {
  if (teacher_params.size() != student_params.size())
    throw std::invalid_argument("ema_update: dimension mismatch");
  if (gamma < 0.0 || gamma > 1.0)
    throw std::invalid_argument("ema_update: gamma outside [0, 1]");
  for (std::size_t i = 0; i < teacher_params.size(); ++i)
    teacher_params[i] =
        gamma * teacher_params[i] + (1.0 - gamma) * student_params[i];
}

bool vad_keep(const Waveform& w, const VadConfig& cfg) {
  const std::size_t frame = static_cast<std::size_t>(
      std::lround(cfg.frame_ms * 1e-3 * w.sample_rate));
  if (frame == 0 || w.size() < frame) return false;

  std::vector<double> frame_db;
  double peak_db = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + frame <= w.size(); i += frame) {
    double acc = 0.0;
    for (std::size_t k = i; k < i + frame; ++k)
      acc += w.samples[k] * w.samples[k];
    const double db = acc > 0.0
                          ? 10.0 * std::log10(acc / double(frame))
                          : -std::numeric_limits<double>::infinity();
    frame_db.push_back(db);
    peak_db = std::max(peak_db, db);
  }
  if (!std::isfinite(peak_db)) return false;  // digital silence

  std::size_t quiet = 0;
  for (double db : frame_db)
    if (db < peak_db - cfg.threshold_db) ++quiet;
  return static_cast<double>(quiet) >=
         cfg.min_quiet_fraction * static_cast<double>(frame_db.size());
}

std::vector<std::size_t> vad_filter_indices(const std::vector<Waveform>& segs,
                                            const VadConfig& cfg) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < segs.size(); ++i)
    if (vad_keep(segs[i], cfg)) keep.push_back(i);
  return keep;
}

std::vector<LabeledExample> load_labeled_manifest(
    const std::string& manifest_path) {
  namespace fs = std::filesystem;
  std::ifstream f(manifest_path);
  if (!f) throw AudioError(manifest_path + ": cannot open manifest");
  const fs::path dir = fs::path(manifest_path).parent_path();
  std::vector<LabeledExample> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    LabeledExample ex;
    ex.mixture =
        read_wav((dir / j.at("files").at("mixture").get<std::string>())
                     .string());
    ex.speech_ref =
        read_wav((dir / j.at("files").at("speech_sum").get<std::string>())
                     .string());
    ex.noise_ref =
        read_wav((dir / j.at("files").at("noise").get<std::string>())
                     .string());
    out.push_back(std::move(ex));
  }
  return out;
}

double dev_si_sdr(const Enhancer& enhancer,
                  const std::vector<LabeledExample>& dev) {
  if (dev.empty()) throw std::invalid_argument("dev_si_sdr: empty dev set");
  double sum = 0.0;
  for (const auto& ex : dev) {
    auto [s, nz] = enhancer.enhance(ex.mixture);
    sum += si_sdr(s, ex.speech_ref).value_db;
  }
  return sum / static_cast<double>(dev.size());
}

std::vector<double> pretrain(Enhancer& enhancer,
                             const std::vector<LabeledExample>& data,
                             int epochs, double learning_rate, int batch_size,
                             uint64_t seed) {
  if (data.empty()) throw std::invalid_argument("pretrain: empty data");
  std::vector<double> losses;
  for (int e = 0; e < epochs; ++e) {
    Rng rng = Rng::child(seed, static_cast<uint64_t>(e) + 1);
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_index(i)]);

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size();
         b += static_cast<std::size_t>(batch_size)) {
      std::vector<Waveform> mixes;
      PseudoLabels targets;
      for (std::size_t i = b;
           i < std::min(order.size(), b + static_cast<std::size_t>(batch_size));
           ++i) {
        mixes.push_back(data[order[i]].mixture);
        targets.push_back(
            {data[order[i]].speech_ref, data[order[i]].noise_ref});
      }
      if (mixes.empty()) break;
      epoch_loss += student_step(enhancer, mixes, targets, learning_rate);
      ++batches;
    }
    losses.push_back(batches ? epoch_loss / double(batches) : 0.0);
  }
  return losses;
}

AdaptResult adapt(const AdaptConfig& config, const Enhancer& teacher_init,
                  const std::vector<Waveform>& unlabeled,
                  const std::vector<LabeledExample>& dev) {
  if (unlabeled.empty()) throw std::invalid_argument("adapt: empty data");
  if (config.batch_size < 2)
    throw std::invalid_argument("adapt: batch_size must be >= 2");

  AdaptResult result;
  std::vector<const Waveform*> pool;
  if (config.vad_filter) {
    auto keep = vad_filter_indices(unlabeled, config.vad);
    for (auto i : keep) pool.push_back(&unlabeled[i]);
    result.filtered_out = unlabeled.size() - keep.size();
  } else {
    for (const auto& w : unlabeled) pool.push_back(&w);
  }
  result.training_segments = pool.size();
  if (pool.size() < static_cast<std::size_t>(config.batch_size))
    throw std::invalid_argument(
        "adapt: fewer training segments than one batch");

  std::unique_ptr<Enhancer> student = teacher_init.clone();
  std::unique_ptr<Enhancer> teacher = teacher_init.clone();
  std::vector<double> teacher_params = teacher->params();

  result.best_params = student->params();
  result.best_dev_si_sdr = dev_si_sdr(*student, dev);
  result.best_epoch = -1;

  int batches_since_ema = 0;
  for (int e = 0; e < config.epochs; ++e) {
    Rng rng = Rng::child(config.seed, static_cast<uint64_t>(e) + 1);
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_index(i)]);

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0;
         b + static_cast<std::size_t>(config.batch_size) <= order.size();
         b += static_cast<std::size_t>(config.batch_size)) {
      std::vector<Waveform> mixes;
      for (std::size_t i = b;
           i < b + static_cast<std::size_t>(config.batch_size); ++i)
        mixes.push_back(*pool[order[i]]);

      teacher->set_params(teacher_params);
      PseudoLabels pseudo = teacher_infer(*teacher, mixes);
      crop_to_common_length(pseudo);
      auto perm = cyclic_permutation(pseudo.size());
      auto bootstrapped = remix(pseudo, perm);
      PseudoLabels targets;
      for (std::size_t i = 0; i < pseudo.size(); ++i)
        targets.push_back({pseudo[i].first, pseudo[perm[i]].second});

      epoch_loss +=
          student_step(*student, bootstrapped, targets, config.learning_rate);
      ++batches;

      if (++batches_since_ema >= config.ema.update_every) {
        ema_update(teacher_params, student->params(), config.ema.gamma);
        batches_since_ema = 0;
      }
    }

    EpochLog log;
    log.epoch = e;
    log.mean_loss = batches ? epoch_loss / double(batches) : 0.0;
    log.dev_si_sdr = dev_si_sdr(*student, dev);
    {
      const auto sp = student->params();
      double d = 0.0;
      for (std::size_t i = 0; i < sp.size(); ++i)
        d += (sp[i] - teacher_params[i]) * (sp[i] - teacher_params[i]);
      log.teacher_student_distance = std::sqrt(d);
    }
    result.log.push_back(log);

    if (log.dev_si_sdr > result.best_dev_si_sdr) {
      result.best_dev_si_sdr = log.dev_si_sdr;
      result.best_params = student->params();
      result.best_epoch = e;
    }
  }
  return result;
}

}  // namespace udase
