#include "casd/modality.hpp"

#include <cctype>

#include "casd/error.hpp"

namespace casd {

std::string ModalityMask::name() const {
  std::string out = "{";
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    if (!has(m)) continue;
    if (out.size() > 1) out += ',';
    out += kModalityLetters[m];
  }
  return out + "}";
}

std::vector<ModalityMask> partial_masks() {
  return {ModalityMask(0b001), ModalityMask(0b010), ModalityMask(0b100),
          ModalityMask(0b011), ModalityMask(0b101), ModalityMask(0b110)};
}

std::vector<ModalityMask> all_nonempty_masks() {
  auto masks = partial_masks();
  masks.push_back(ModalityMask::all());
  return masks;
}

ModalityMask parse_mask(std::string_view text) {
  auto invalid = [&]() -> ModalityMask {
    std::string valid;
    for (ModalityMask m : all_nonempty_masks()) valid += (valid.empty() ? "" : " ") + m.name();
    fail(ErrorKind::kUsage, "unknown condition '" + std::string(text) + "'; valid names: " + valid);
  };
  std::uint8_t bits = 0;
  for (char c : text) {
    if (c == '{' || c == '}' || c == ',' || std::isspace(static_cast<unsigned char>(c))) continue;
    std::size_t m = 0;
    while (m < kNumModalities && kModalityLetters[m] != std::tolower(static_cast<unsigned char>(c))) ++m;
    if (m == kNumModalities || (bits >> m) & 1u) return invalid();
    bits |= static_cast<std::uint8_t>(1u << m);
  }
  if (bits == 0) return invalid();
  return ModalityMask(bits);
}

}  // namespace casd
