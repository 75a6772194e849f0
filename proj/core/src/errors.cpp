#include "spadict/errors.hpp"

namespace spadict {

std::string with_layer(const std::string& layer, const std::string& message) {
  if (layer.empty()) return message;
  return "layer '" + layer + "': " + message;
}

}  // namespace spadict
