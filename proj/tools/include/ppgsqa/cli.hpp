#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ppgsqa/data_io.hpp"
#include "ppgsqa/errors.hpp"

namespace ppgsqa::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kDataError = 3,
  kMismatch = 4,
};

/// Maps a library error to the process exit code. A record that is too short
/// for the model is a mismatch when predicting and a data error elsewhere.
int exit_code_for(ErrorKind kind, bool predicting);

/// Runs one invocation. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Eval-mode scores for every segment of a record. Degenerate segments are
/// scored 0 (Bad) without running the network.
std::vector<Prediction> score_record(const Model<float>& model, const ChannelSet& channels, const SignalRecord& rec,
                                     const PreprocessConfig& cfg = {}, bool with_truth = true);

}  // namespace ppgsqa::cli
