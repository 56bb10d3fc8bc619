#include "priorsfm/io/config_io.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "priorsfm/util/errors.h"

namespace priorsfm {

namespace {

// One addressable config field: how to set it from text and how to render
// its current value.
struct Binding {
  std::string key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

std::string FormatValue(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

double ToDouble(const std::string& key, const std::string& text) {
  size_t consumed = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &consumed);
  } catch (const std::exception&) {
    throw ParseError("config key " + key + ": expected a number, got '" +
                     text + "'");
  }
  if (consumed != text.size()) {
    throw ParseError("config key " + key + ": trailing characters in '" +
                     text + "'");
  }
  return value;
}

int ToInt(const std::string& key, const std::string& text) {
  size_t consumed = 0;
  long value = 0;
  try {
    value = std::stol(text, &consumed);
  } catch (const std::exception&) {
    throw ParseError("config key " + key + ": expected an integer, got '" +
                     text + "'");
  }
  if (consumed != text.size()) {
    throw ParseError("config key " + key + ": trailing characters in '" +
                     text + "'");
  }
  return static_cast<int>(value);
}

bool ToBool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ParseError("config key " + key + ": expected true/false/1/0, got '" +
                   text + "'");
}

uint64_t ToU64(const std::string& key, const std::string& text) {
  size_t consumed = 0;
  unsigned long long value = 0;
  try {
    value = std::stoull(text, &consumed);
  } catch (const std::exception&) {
    throw ParseError("config key " + key + ": expected an unsigned integer, "
                     "got '" + text + "'");
  }
  if (consumed != text.size()) {
    throw ParseError("config key " + key + ": trailing characters in '" +
                     text + "'");
  }
  return value;
}

std::vector<Binding> Bindings(PipelineConfig* c) {
  std::vector<Binding> bindings;
  const auto add_double = [&](const std::string& key, double* field) {
    bindings.push_back({key,
                        [key, field](const std::string& v) {
                          *field = ToDouble(key, v);
                        },
                        [field] { return FormatValue(*field); }});
  };
  const auto add_int = [&](const std::string& key, int* field) {
    bindings.push_back({key,
                        [key, field](const std::string& v) {
                          *field = ToInt(key, v);
                        },
                        [field] { return std::to_string(*field); }});
  };
  const auto add_bool = [&](const std::string& key, bool* field) {
    bindings.push_back({key,
                        [key, field](const std::string& v) {
                          *field = ToBool(key, v);
                        },
                        [field] { return *field ? "true" : "false"; }});
  };

  add_double("relpose.max_sampson_px", &c->relative_pose.max_sampson_px);
  add_double("relpose.confidence", &c->relative_pose.confidence);
  add_int("relpose.max_iterations", &c->relative_pose.max_iterations);
  add_int("relpose.min_inliers", &c->relative_pose.min_inliers);
  add_double("relpose.min_parallax_deg", &c->relative_pose.min_parallax_deg);

  add_double("abspose.max_error_px", &c->absolute_pose.max_error_px);
  add_double("abspose.confidence", &c->absolute_pose.confidence);
  add_int("abspose.max_iterations", &c->absolute_pose.max_iterations);
  add_int("abspose.min_inliers", &c->absolute_pose.min_inliers);

  add_double("refine.prior_truncation_sigma",
             &c->refine.prior_truncation_sigma);
  add_double("refine.integration_truncation_sigma",
             &c->refine.integration_truncation_sigma);
  add_double("refine.anchor_cauchy_scale", &c->refine.anchor_cauchy_scale);
  add_double("refine.bilateral_k", &c->refine.bilateral_k);
  add_int("refine.max_outer_iterations", &c->refine.max_outer_iterations);
  add_double("refine.relative_cost_tolerance",
             &c->refine.relative_cost_tolerance);
  add_double("refine.cg_tolerance", &c->refine.cg_tolerance);
  add_int("refine.cg_max_iterations", &c->refine.cg_max_iterations);

  add_double("bundle.reproj_transition_px", &c->bundle.reproj_transition_px);
  add_double("bundle.reproj_max_squared_px",
             &c->bundle.reproj_max_squared_px);
  add_double("bundle.depth_cauchy_scale", &c->bundle.depth_cauchy_scale);
  add_double("bundle.depth_term_weight", &c->bundle.depth_term_weight);
  add_int("bundle.max_iterations", &c->bundle.max_iterations);
  add_double("bundle.relative_decrease_tolerance",
             &c->bundle.relative_decrease_tolerance);
  add_double("bundle.gradient_tolerance", &c->bundle.gradient_tolerance);
  add_double("bundle.initial_lambda", &c->bundle.initial_lambda);
  add_double("bundle.max_lambda", &c->bundle.max_lambda);

  add_double("filter.max_reproj_px", &c->filter.max_reproj_px);
  add_double("filter.min_tri_angle_deg", &c->filter.min_tri_angle_deg);

  add_int("schedule.local_window_size", &c->schedule.local_window_size);
  add_double("schedule.global_growth_ratio",
             &c->schedule.global_growth_ratio);
  add_int("schedule.rounds", &c->schedule.rounds);

  add_double("consistency.gamma", &c->consistency.gamma);
  add_double("consistency.max_inconsistency",
             &c->consistency.max_inconsistency);

  add_double("calibration.scale", &c->calibration.scale);
  add_double("calibration.floor_abs", &c->calibration.floor_abs);
  add_double("calibration.depth_fraction", &c->calibration.depth_fraction);

  add_double("normal.variance_floor", &c->normal_propagation.variance_floor);
  add_double("normal.pole_threshold", &c->normal_propagation.pole_threshold);

  add_double("alternation.skip_threshold", &c->skip_threshold);
  bindings.push_back(
      {"alternation.anchor_weight_mode",
       [c](const std::string& v) {
         if (v == "combined") {
           c->anchor_weight_mode = AnchorWeightMode::kCombined;
         } else if (v == "prior_only") {
           c->anchor_weight_mode = AnchorWeightMode::kPriorOnly;
         } else {
           throw ParseError(
               "config key alternation.anchor_weight_mode: expected "
               "combined|prior_only, got '" + v + "'");
         }
       },
       [c] {
         return c->anchor_weight_mode == AnchorWeightMode::kCombined
                    ? "combined"
                    : "prior_only";
       }});

  add_double("triangulation.min_parallax_deg",
             &c->min_triangulation_angle_deg);
  add_int("lifting.budget", &c->lifted_budget);
  add_int("register.candidate_retry_limit", &c->candidate_retry_limit);
  add_bool("init.allow_pnp_fallback", &c->allow_pnp_init);

  add_bool("ablation.no_lifting", &c->no_lifting);
  add_bool("ablation.no_depth_reg", &c->no_depth_reg);
  add_bool("ablation.no_depth_refinement", &c->no_depth_refinement);
  add_bool("ablation.no_consistency_check", &c->no_consistency_check);

  bindings.push_back({"seed",
                      [c](const std::string& v) { c->seed = ToU64("seed", v); },
                      [c] { return std::to_string(c->seed); }});

  return bindings;
}

void ApplyKeyValue(PipelineConfig* config, const std::string& key,
                   const std::string& value, const std::string& context) {
  for (const Binding& binding : Bindings(config)) {
    if (binding.key == key) {
      binding.set(value);
      return;
    }
  }
  throw ValidationError(context + ": unknown config key '" + key + "'");
}

std::string Trim(const std::string& text) {
  const size_t begin = text.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const size_t end = text.find_last_not_of(" \t\r");
  return text.substr(begin, end - begin + 1);
}

}  // namespace

void ApplyConfigFile(PipelineConfig* config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string trimmed = Trim(line);
    if (trimmed.empty()) continue;
    const size_t eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw ParseError(path + ":" + std::to_string(number) +
                       ": expected 'key = value'");
    }
    const std::string key = Trim(trimmed.substr(0, eq));
    const std::string value = Trim(trimmed.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ParseError(path + ":" + std::to_string(number) +
                       ": empty key or value");
    }
    ApplyKeyValue(config, key, value, path + ":" + std::to_string(number));
  }
}

void ApplyConfigSetting(PipelineConfig* config, const std::string& setting) {
  const size_t eq = setting.find('=');
  if (eq == std::string::npos) {
    throw ParseError("--set expects key=value, got '" + setting + "'");
  }
  const std::string key = Trim(setting.substr(0, eq));
  const std::string value = Trim(setting.substr(eq + 1));
  if (key.empty() || value.empty()) {
    throw ParseError("--set expects key=value, got '" + setting + "'");
  }
  ApplyKeyValue(config, key, value, "--set " + setting);
}

std::vector<std::string> ConfigKeys() {
  PipelineConfig config;
  std::vector<std::string> keys;
  for (const Binding& binding : Bindings(&config)) keys.push_back(binding.key);
  std::sort(keys.begin(), keys.end());
  return keys;
}

std::string RenderConfig(const PipelineConfig& config) {
  // Bindings take a mutable pointer but rendering only reads.
  PipelineConfig copy = config;
  std::vector<Binding> bindings = Bindings(&copy);
  std::sort(bindings.begin(), bindings.end(),
            [](const Binding& a, const Binding& b) { return a.key < b.key; });
  std::ostringstream out;
  for (const Binding& binding : bindings) {
    out << binding.key << " = " << binding.get() << "\n";
  }
  return out.str();
}

}  // namespace priorsfm
