#include "fdnc/timing.hpp"

#include <cstdio>
#include <vector>

#include "json.hpp"

#include "fdnc/io.hpp"

namespace fdnc {

std::string_view stage_name(Stage s) noexcept {
  switch (s) {
    case Stage::mcmc: return "mcmc";
    case Stage::training: return "training";
    case Stage::weighting: return "weighting";
    case Stage::combination: return "combination";
  }
  return "?";
}

std::string_view stage_label(Stage s) noexcept {
  switch (s) {
    case Stage::mcmc: return "MCMC";
    case Stage::training: return "Training";
    case Stage::weighting: return "Weighting";
    case Stage::combination: return "Combination";
  }
  return "?";
}

double MethodTiming::total() const {
  double t = 0.0;
  for (const auto& s : seconds) t += s.value_or(0.0);
  return t;
}

std::string timing_to_json(const TimingReport& report) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, mt] : report.methods) {
    nlohmann::json row = nlohmann::json::object();
    for (Stage s : kStages) {
      const auto& v = mt[s];
      row[std::string(stage_name(s))] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    }
    row["total"] = mt.total();
    j[name] = std::move(row);
  }
  return j.dump(2) + "\n";
}

TimingReport timing_from_json(const std::string& text) {
  TimingReport r;
  auto j = nlohmann::json::parse(text);
  for (auto it = j.begin(); it != j.end(); ++it) {
    MethodTiming mt;
    for (Stage s : kStages) {
      const auto key = std::string(stage_name(s));
      if (it->contains(key) && !(*it)[key].is_null()) mt[s] = (*it)[key].get<double>();
    }
    r.methods[it.key()] = mt;
  }
  return r;
}

std::string timing_to_text(const TimingReport& report) {
  constexpr int kLabelWidth = 12;
  constexpr int kCellWidth = 12;
  char buf[64];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%-*s", kLabelWidth, "");
  out += buf;
  for (const auto& [name, mt] : report.methods) {
    std::snprintf(buf, sizeof(buf), "%*s", kCellWidth, name.c_str());
    out += buf;
  }
  out += '\n';
  auto row = [&](std::string_view label, auto&& cell) {
    std::snprintf(buf, sizeof(buf), "%-*.*s", kLabelWidth, static_cast<int>(label.size()),
                  label.data());
    out += buf;
    for (const auto& [name, mt] : report.methods) {
      const std::optional<double> v = cell(mt);
      if (v) {
        std::snprintf(buf, sizeof(buf), "%*.3f", kCellWidth, *v);
        out += buf;
      } else {
        // Em dash is three bytes but one column wide.
        out += std::string(kCellWidth - 1, ' ') + "\xE2\x80\x94";
      }
    }
    out += '\n';
  };
  for (Stage s : kStages) {
    row(stage_label(s), [s](const MethodTiming& mt) { return mt[s]; });
  }
  row("Total", [](const MethodTiming& mt) { return std::optional<double>(mt.total()); });
  return out;
}

void emit_timing(const TimingReport& report, const std::filesystem::path& dir) {
  write_text(dir / "timing.json", timing_to_json(report));
  write_text(dir / "timing.txt", timing_to_text(report));
}

}  // namespace fdnc
