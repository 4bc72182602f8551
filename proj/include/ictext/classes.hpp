#pragma once

#include <optional>

namespace ictext {

/// Character classes: digits 0-9 map to 0..9, a-z to 10..35, A-Z to 36..61.
inline constexpr int kNumClasses = 62;
inline constexpr int kFirstLowercase = 10;
inline constexpr int kLastLowercase = 35;

/// Number of aesthetic labels (blurry, low contrast, broken).
inline constexpr int kNumAesthetic = 3;

std::optional<int> class_index(char c) noexcept;
/// Throws ValidationError when `index` is outside [0, 62).
char class_char(int index);
bool is_valid_class(int index) noexcept;

}  // namespace ictext
