#include "tta/config.hpp"

#include <cmath>
#include <sstream>

#include "tta/error.hpp"

namespace tta {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::no_adapt: return "no_adapt";
    case Strategy::pseudo_label: return "pseudo_label";
    case Strategy::prototype_only: return "prototype_only";
    case Strategy::ours: return "ours";
  }
  throw ArgumentError("to_string: unknown strategy");
}

Strategy strategy_from_string(const std::string& name) {
  if (name == "no_adapt") return Strategy::no_adapt;
  if (name == "pseudo_label") return Strategy::pseudo_label;
  if (name == "prototype_only") return Strategy::prototype_only;
  if (name == "ours") return Strategy::ours;
  throw ArgumentError("unknown strategy '" + name + "'");
}

void StrategyConfig::validate() const {
  if (memory_capacity == 0) throw ConfigError("config: memory capacity must be positive");
  if (n_layers == 0) throw ConfigError("config: layer count must be positive");
  if (k_steps == 0) throw ConfigError("config: update step count must be positive");
  if (batch_size == 0) throw ConfigError("config: batch size must be positive");
  if (!(conf >= 0.0 && conf <= 1.0)) throw ConfigError("config: conf must lie in [0, 1]");
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw ConfigError("config: alpha must be finite and nonnegative");
  if (!(lr > 0.0) || !std::isfinite(lr))
    throw ConfigError("config: learning rate must be finite and positive");
}

std::string StrategyConfig::echo() const {
  std::ostringstream os;
  os << "strategy=" << to_string(strategy) << " n_m=" << memory_capacity
     << " n_t=" << n_layers << " d_t=" << transform_dim << " n_f=" << n_neighbors
     << " conf=" << conf << " alpha=" << alpha << " lr=" << lr
     << " k_s=" << k_steps << " batch=" << batch_size << " seed=" << seed
     << " lcpc_train=" << (enable_lcpc_training ? 1 : 0)
     << " nfc=" << (enable_nfc ? 1 : 0)
     << " predict_after_update=" << (predict_after_update ? 1 : 0)
     << " grad_through_neighbors=" << (nfc_grad_through_neighbors ? 1 : 0)
     << " reset_adam_per_batch=" << (reset_optimizer_per_batch ? 1 : 0)
     << " identity_transform=" << (identity_transform ? 1 : 0);
  return os.str();
}

}  // namespace tta
