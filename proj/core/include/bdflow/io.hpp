#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace bdflow {

/// Round-trip representation of a double: 17 significant digits, '.' decimal,
/// locale independent. Non-finite values print as nan/inf/-inf.
std::string format_real(double x);

/// Writes `contents` to a temporary sibling of `path` and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace bdflow
