// Enhancer checkpoint files: JSON {enhancer_kind, bands, theta, epoch,
// dev_score}.

#ifndef UDASE_CHECKPOINT_HPP
#define UDASE_CHECKPOINT_HPP

#include <memory>
#include <string>
#include <vector>

#include "udase/enhancer.hpp"

namespace udase {

struct Checkpoint {
  std::string enhancer_kind = "gain";
  int bands = 32;
  std::vector<double> theta;
  int epoch = -1;
  double dev_score = 0.0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// Builds an enhancer from a checkpoint (only "gain" is known here).
std::unique_ptr<Enhancer> make_enhancer(const Checkpoint& ck);

}  // namespace udase

#endif  // UDASE_CHECKPOINT_HPP
