#pragma once

#include <string_view>

#include "json.hpp"
#include "tidal/eval.hpp"

namespace tidal {

nlohmann::ordered_json evaluation_json(std::string_view task, const ConfusionMatrix& cm,
                                       const MetricsReport& report);

}  // namespace tidal
