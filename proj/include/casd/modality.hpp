#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "casd/tensor.hpp"

namespace casd {

inline constexpr std::size_t kNumModalities = 3;

// Fixed order used everywhere: language, audio, vision.
enum class Modality : std::uint8_t { kLanguage = 0, kAudio = 1, kVision = 2 };

inline constexpr std::array<char, kNumModalities> kModalityLetters{'l', 'a', 'v'};

// One [T×d_m] sequence per modality.
using ModalityInputs = std::array<Tensor, kNumModalities>;

// Set of available modalities.
class ModalityMask {
 public:
  constexpr ModalityMask() = default;
  constexpr explicit ModalityMask(std::uint8_t bits) : bits_(bits & 0b111) {}
  static constexpr ModalityMask all() { return ModalityMask(0b111); }

  constexpr bool has(std::size_t m) const { return (bits_ >> m) & 1u; }
  constexpr std::uint8_t bits() const { return bits_; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::size_t count() const { return has(0) + has(1) + has(2); }

  // "{l,a,v}" style; the inverse of parse_mask.
  std::string name() const;

  friend constexpr bool operator==(ModalityMask, ModalityMask) = default;

 private:
  std::uint8_t bits_ = 0;
};

// Accepts "{l,a}", "l,a", "la" (any order, no repeats). Throws a usage error
// listing valid names otherwise.
ModalityMask parse_mask(std::string_view text);

// All seven non-empty subsets, singletons first, then pairs, then the full set.
std::vector<ModalityMask> all_nonempty_masks();

// The six partial subsets in reporting order {l},{a},{v},{l,a},{l,v},{a,v}.
std::vector<ModalityMask> partial_masks();

}  // namespace casd
