#pragma once

// The u3d command-line tool. run() parses arguments, executes one subcommand
// and maps failures to exit codes: 0 success, 2 validation, 3 protocol or
// malformed data, 4 I/O.

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace u3d::cli {

inline constexpr const char* kToolName = "u3d";
inline constexpr const char* kToolVersion = "0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitProtocol = 3;
inline constexpr int kExitIo = 4;

// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Plain-text rendering of a bench report.
std::string render_bench_table(const nlohmann::ordered_json& bench);

// Copy of `j` with every "seconds" member removed at any depth. Artifacts are
// compared this way in the determinism checks since wall-clock time is the
// one field that legitimately differs between runs.
nlohmann::ordered_json strip_timings(const nlohmann::ordered_json& j);

}  // namespace u3d::cli
