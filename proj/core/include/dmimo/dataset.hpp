#pragma once

#include <string>
#include <vector>

#include "dmimo/channel.hpp"

namespace dmimo {

/// Line-oriented text format: header line "K M", then one instance per line
/// as K*M space-separated decimal floats, user-major (row k first), linear
/// scale. Values are written with enough digits to round-trip exactly.
void write_dataset(const std::string& path, const std::vector<ChannelInstance>& instances);

/// Throws std::runtime_error on malformed files or rows that disagree with
/// the header dimensions.
std::vector<ChannelInstance> read_dataset(const std::string& path);

}  // namespace dmimo
