#pragma once

#include <string_view>
#include <unordered_map>
#include <vector>

namespace texmill::metadata::detail {

const std::unordered_map<std::string_view, std::vector<std::string_view>>& stopword_profiles();

}  // namespace texmill::metadata::detail
