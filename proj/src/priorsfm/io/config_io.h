#ifndef PRIORSFM_IO_CONFIG_IO_H_
#define PRIORSFM_IO_CONFIG_IO_H_

#include <string>
#include <vector>

#include "priorsfm/pipeline/config.h"

namespace priorsfm {

// Applies `key = value` lines from a config file; `#` comments and blank
// lines are ignored. Unknown keys raise ValidationError, malformed lines
// ParseError.
void ApplyConfigFile(PipelineConfig* config, const std::string& path);

// Applies one `key=value` override (the --set form).
void ApplyConfigSetting(PipelineConfig* config, const std::string& setting);

// Every addressable key, sorted, for help output and coverage tests.
std::vector<std::string> ConfigKeys();

// The full configuration rendered as `key = value` lines.
std::string RenderConfig(const PipelineConfig& config);

}  // namespace priorsfm

#endif  // PRIORSFM_IO_CONFIG_IO_H_
