#pragma once

namespace jsmoco {

inline constexpr const char *kVersion = "0.1.0";

} // namespace jsmoco
