#pragma once

#include "mifq/ilcore.hpp"

#include <functional>

namespace mifq {

using BaselineKind = AlgoKind;

/// Called after each BC epoch with (epoch, train CE, val CE).
using BcEpochHook = std::function<void(int, double, double)>;

/// Offline behavioral cloning: per-agent policy nets trained by
/// cross-entropy on (o_i, a_i) pairs, early-stopped on a held-out split.
/// Never touches an environment.
TrainResult bc_train(const DemonstrationSet& demos, const DecPomdpSpec& spec,
                     const TrainConfig& cfg, const BcEpochHook& hook = nullptr);

TrainResult iiq_train(Env& env, const DemonstrationSet& demos, const TrainConfig& cfg);
TrainResult iqvdn_train(Env& env, const DemonstrationSet& demos, const TrainConfig& cfg);
TrainResult masqil_train(Env& env, const DemonstrationSet& demos, const TrainConfig& cfg);
TrainResult mifq_train(Env& env, const DemonstrationSet& demos, const TrainConfig& cfg);

/// One entry point for every algorithm; BC uses the env only to fill the
/// evaluation columns of its metrics rows.
TrainResult run_algo(Env& env, const DemonstrationSet& demos, const TrainConfig& cfg,
                     AlgoKind algo);

}  // namespace mifq
