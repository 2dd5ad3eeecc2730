#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace scitag {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `scitag` executable with injectable streams.
int runCli(int argc, const char* const* argv, std::istream& in, std::ostream& out,
           std::ostream& err);

int cmdRun(const std::filesystem::path& experiment, std::ostream& out, std::ostream& err);
int cmdTest(const std::filesystem::path& experiment, std::ostream& out, std::ostream& err);
int cmdPredict(const std::filesystem::path& checkpoint, const std::optional<std::string>& text,
               const std::optional<std::filesystem::path>& file,
               const std::optional<std::filesystem::path>& outPath, std::ostream& out,
               std::ostream& err);
int cmdInteract(const std::filesystem::path& checkpoint, std::istream& in, std::ostream& out,
                std::ostream& err);
int cmdDownload(const std::string& task, const std::filesystem::path& registry,
                const std::filesystem::path& dest, std::ostream& out, std::ostream& err);

/// SCITAG_DATA_DIR, else TOOL_DATA_DIR, else ~/.scitag.
std::filesystem::path defaultDataDir();

}  // namespace scitag
