#pragma once

#include "conicxray/config.hpp"

namespace conicxray {

inline constexpr const char* kVersion = "0.1.0";

/// Executes one pipeline; writes artifacts and a manifest under out_dir.
/// Returns 0 on pass, 2 on check failure. Errors propagate as exceptions.
int run_subcommand(const std::string& name, const ExperimentConfig& cfg,
                   const std::string& out_dir);

}  // namespace conicxray
