#include "udase/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace udase {

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  nlohmann::ordered_json j;
  j["enhancer_kind"] = ck.enhancer_kind;
  j["bands"] = ck.bands;
  j["theta"] = ck.theta;
  j["epoch"] = ck.epoch;
  j["dev_score"] = ck.dev_score;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path + ": cannot write checkpoint");
  f << j.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error(path + ": cannot open checkpoint");
  nlohmann::json j;
  f >> j;
  Checkpoint ck;
  ck.enhancer_kind = j.at("enhancer_kind").get<std::string>();
  ck.bands = j.at("bands").get<int>();
  ck.theta = j.at("theta").get<std::vector<double>>();
  ck.epoch = j.at("epoch").get<int>();
  ck.dev_score = j.at("dev_score").get<double>();
  return ck;
}

std::unique_ptr<Enhancer> make_enhancer(const Checkpoint& ck) {
  if (ck.enhancer_kind != "gain")
    throw std::runtime_error("unknown enhancer kind: " + ck.enhancer_kind);
  auto e = std::make_unique<GainEnhancer>(ck.bands);
  if (!ck.theta.empty()) e->set_params(ck.theta);
  return e;
}

}  // namespace udase
