#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hmof/config.hpp"
#include "hmof/evaluation.hpp"

namespace hmof::cli {

// Process exit codes.
inline constexpr int kOk = 0;
inline constexpr int kConfigError = 2;
inline constexpr int kDataError = 3;
inline constexpr int kModelError = 4;

/// Full command line without the program name, e.g. {"train", "--config", "run.cfg"}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct EvalSummary {
  double auc_frame = 0.0;
  double eer_frame = 0.0;
  bool has_pixel = false;
  double auc_pixel = 0.0;
  double eer_pixel = 0.0;
};

void cmd_train(const Config& config, bool force, std::ostream& log);
void cmd_detect(const Config& config, std::ostream& log);
EvalSummary cmd_eval(const Config& config, std::ostream& log);
void cmd_synth(const Config& config, std::ostream& log);
void cmd_bench(const Config& config, std::ostream& log);
void cmd_ablate(const Config& config, bool force, std::ostream& log);

}  // namespace hmof::cli
