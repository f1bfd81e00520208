#pragma once

#include <string>

namespace reforce {

// Returns the embedded prompts/<name>.txt content. Throws on unknown names.
const std::string& prompt_asset(const std::string& name);

}  // namespace reforce
