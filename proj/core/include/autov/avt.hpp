#pragma once

#include <filesystem>
#include <iosfwd>

#include "autov/matrix.hpp"

namespace autov {

// AVT1 tensor blob: "AVT1", rows (u32 LE), cols (u32 LE), rows*cols float32 LE
// values in row-major order.
inline constexpr char kAvtMagic[4] = {'A', 'V', 'T', '1'};

void write_avt(std::ostream& out, const TokenMatrix& m);
TokenMatrix read_avt(std::istream& in);

void save_avt(const std::filesystem::path& path, const TokenMatrix& m);
TokenMatrix load_avt(const std::filesystem::path& path);

}  // namespace autov
