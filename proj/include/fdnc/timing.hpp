#ifndef FDNC_TIMING_HPP
#define FDNC_TIMING_HPP

#include <array>
#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace fdnc {

enum class Stage { mcmc, training, weighting, combination };

inline constexpr std::array<Stage, 4> kStages = {Stage::mcmc, Stage::training, Stage::weighting,
                                                 Stage::combination};

std::string_view stage_name(Stage s) noexcept;
/// Row label used in the text table ("MCMC", "Training", ...).
std::string_view stage_label(Stage s) noexcept;

/// Wall-clock seconds per stage for one method; stages the method does not have are empty.
struct MethodTiming {
  std::array<std::optional<double>, 4> seconds{};

  std::optional<double>& operator[](Stage s) { return seconds[static_cast<std::size_t>(s)]; }
  const std::optional<double>& operator[](Stage s) const {
    return seconds[static_cast<std::size_t>(s)];
  }
  double total() const;

  bool operator==(const MethodTiming&) const = default;
};

struct TimingReport {
  std::map<std::string, MethodTiming> methods;

  bool operator==(const TimingReport&) const = default;
};

std::string timing_to_json(const TimingReport& report);
TimingReport timing_from_json(const std::string& text);
/// Aligned table, one column per method, rows MCMC/Training/Weighting/Combination/Total.
std::string timing_to_text(const TimingReport& report);

/// Writes timing.json and timing.txt into `dir`.
void emit_timing(const TimingReport& report, const std::filesystem::path& dir);

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace fdnc

#endif
