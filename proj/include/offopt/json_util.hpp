#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "offopt/error.hpp"

namespace offopt::detail {

using ordered_json = nlohmann::ordered_json;

/// Strict schema check: the object must carry exactly these keys, in order.
inline void expect_keys(const ordered_json& obj, const std::vector<std::string>& expected,
                        const std::string& where) {
  std::vector<std::string> keys;
  for (const auto& item : obj.items()) keys.push_back(item.key());
  if (keys != expected) {
    std::string want;
    for (const auto& k : expected) want += (want.empty() ? "" : ",") + k;
    std::string got;
    for (const auto& k : keys) got += (got.empty() ? "" : ",") + k;
    throw ParseError(where + ": expected fields [" + want + "], got [" + got + "]");
  }
}

}  // namespace offopt::detail
