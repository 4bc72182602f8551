#include "ictext/classes.hpp"

#include <string>

#include "ictext/errors.hpp"

namespace ictext {

std::optional<int> class_index(char c) noexcept {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'z') return kFirstLowercase + (c - 'a');
  if (c >= 'A' && c <= 'Z') return kLastLowercase + 1 + (c - 'A');
  return std::nullopt;
}

bool is_valid_class(int index) noexcept { return index >= 0 && index < kNumClasses; }

char class_char(int index) {
  if (!is_valid_class(index)) {
    throw ValidationError("class index out of range: " + std::to_string(index));
  }
  if (index < kFirstLowercase) return static_cast<char>('0' + index);
  if (index <= kLastLowercase) return static_cast<char>('a' + (index - kFirstLowercase));
  return static_cast<char>('A' + (index - kLastLowercase - 1));
}

}  // namespace ictext
