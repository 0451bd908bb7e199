#ifndef FUGU_TOOLS_COMMANDS_HPP
#define FUGU_TOOLS_COMMANDS_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fugu::cli {

enum ExitCode : int { kSuccess = 0, kUsageError = 1, kDataError = 2, kInvariantViolation = 3 };

/// An internal consistency check failed.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct CommandOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::string> schemes;  // comma-separated
  std::optional<std::size_t> sessions;
  std::optional<std::int64_t> window_days;
  std::optional<std::filesystem::path> warm_start;
  std::vector<std::filesystem::path> inputs;  // positional paths
};

void cmd_generate(const CommandOptions& options, std::ostream& out);
void cmd_simulate(const CommandOptions& options, std::ostream& out);
void cmd_train(const CommandOptions& options, std::ostream& out);
void cmd_evaluate(const CommandOptions& options, std::ostream& out);
void cmd_ablate(const CommandOptions& options, std::ostream& out);
void cmd_report(const CommandOptions& options, std::ostream& out);
void cmd_loop(const CommandOptions& options, std::ostream& out);

/// Parses arguments, runs one subcommand and maps failures to exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Archive directories under `path`: the path itself if it holds telemetry
/// files, otherwise its immediate subdirectories that do, sorted by name.
std::vector<std::filesystem::path> expand_archives(const std::filesystem::path& path);

}  // namespace fugu::cli

#endif  // FUGU_TOOLS_COMMANDS_HPP
