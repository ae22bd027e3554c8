#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace saten::cli {

// Exit codes: 0 success, 1 validation failure, 2 I/O or format error,
// 3 config error.

struct CompressArgs {
    std::filesystem::path input;
    std::filesystem::path config;
    std::filesystem::path output;
    std::filesystem::path report;       // empty = no report file
    std::filesystem::path tokens;       // empty = no token stream
    std::string token_format = "text";  // "text" or "bin"
};
int run_compress(const CompressArgs& args, std::ostream& log);

struct VerifyArgs {
    std::filesystem::path original;
    std::filesystem::path compressed;
    std::int64_t samples = 8;
};
int run_verify(const VerifyArgs& args, std::ostream& log);

struct FinetuneArgs {
    std::filesystem::path compressed;
    std::filesystem::path data;
    std::filesystem::path output; // empty = overwrite --compressed
    double lr = 1e-3;
    std::int64_t steps = 0;
};
int run_finetune(const FinetuneArgs& args, std::ostream& log);

struct SynthArgs {
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    std::int64_t rank = 1;
    std::int64_t spikes = 0;
    double noise = 0.0;
    std::uint64_t seed = 0;
    std::string name = "W";
    std::filesystem::path output;
};
int run_synth(const SynthArgs& args, std::ostream& log);

struct ReportArgs {
    std::filesystem::path compressed;
    std::string format = "table"; // "table" or "json"
};
int run_report(const ReportArgs& args, std::ostream& log);

/// Newline-delimited decimal ids ("text") or raw little-endian int32 ("bin").
std::vector<std::int64_t> load_token_stream(const std::filesystem::path& path,
                                            const std::string& format);

/// Maps a thrown saten error to the documented process exit code and prints
/// the message; used by the CLI entry point and end-to-end tests.
int guard(std::ostream& log, const std::function<int()>& body);

} // namespace saten::cli
