#pragma once

// Packet format for ternary switching signals.
//
//   header (13 bytes): 'H' 'O' | version | m | b | T as little-endian double
//   per channel, MSB-first and zero-padded to a byte boundary:
//     init code   2 bits   00 = 0, 01 = +1, 10 = -1, 11 reserved
//     count      16 bits
//     per switch  b bits time index, then one sign bit (0 = +1, 1 = -1) only
//                 when the previous value is 0
//
// Index i decodes to the time T (i + 1) / (2^b + 1).

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "handsoff/errors.hpp"
#include "handsoff/signal.hpp"

namespace handsoff {

inline constexpr std::uint8_t kPacketVersion = 1;
inline constexpr std::size_t kHeaderBytes = 13;
inline constexpr std::size_t kMaxSwitchesPerChannel = 65535;

struct EncodedControl {
  std::vector<std::uint8_t> bytes;

  friend bool operator==(const EncodedControl&, const EncodedControl&) = default;
};

struct BitCount {
  std::size_t header_bits = 0;
  std::size_t payload_bits = 0;  // before padding

  std::size_t total() const noexcept { return header_bits + payload_bits; }
};

class BitWriter {
 public:
  void put(std::uint64_t value, int width) {
    for (int i = width - 1; i >= 0; --i) put_bit((value >> i) & 1U);
  }

  void put_bit(bool bit) {
    if (used_ == 0) bytes_.push_back(0);
    if (bit) bytes_.back() |= static_cast<std::uint8_t>(0x80U >> used_);
    used_ = (used_ + 1) % 8;
    ++bits_;
  }

  void align() { used_ = 0; }

  std::size_t bits() const noexcept { return bits_; }
  std::vector<std::uint8_t>& bytes() noexcept { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
  int used_ = 0;
  std::size_t bits_ = 0;  // excluding padding
};

class BitReader {
 public:
  BitReader(const std::uint8_t* data, std::size_t size)
      : data_(data), size_(size) {}

  std::uint64_t get(int width) {
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v = (v << 1) | (get_bit() ? 1U : 0U);
    return v;
  }

  bool get_bit() {
    if (pos_ >= 8 * size_) throw LengthError("packet truncated");
    const bool bit = (data_[pos_ / 8] >> (7 - pos_ % 8)) & 1U;
    ++pos_;
    return bit;
  }

  /// Skips to the next byte boundary; padding must be zero.
  void align() {
    while (pos_ % 8 != 0) {
      if (get_bit()) throw CorruptionError("non-zero padding bit");
    }
  }

  std::size_t position() const noexcept { return pos_; }
  bool at_end() const noexcept { return pos_ == 8 * size_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

namespace detail {

inline double grid_points(int b) { return std::ldexp(1.0, b) + 1.0; }

inline std::uint64_t quantize_time(double t, double T, int b) {
  const double max_index = std::ldexp(1.0, b) - 1.0;
  const double i = std::round(t * grid_points(b) / T - 1.0);
  return static_cast<std::uint64_t>(std::clamp(i, 0.0, max_index));
}

inline double dequantize_time(std::uint64_t index, double T, int b) {
  return T * (static_cast<double>(index) + 1.0) / grid_points(b);
}

inline std::uint64_t init_code(int v) { return v == 0 ? 0 : (v > 0 ? 1 : 2); }

struct Indexed {
  std::uint64_t index;
  int value;
};

// Quantizes switch times. Switches landing on the same index merge: a pair
// that returns to the earlier value cancels, and a merge that would produce a
// direct sign flip keeps the later switch one index further on.
inline std::vector<Indexed> quantize_channel(const Channel& c, double T,
                                             int b) {
  const std::uint64_t max_index = (std::uint64_t{1} << b) - 1;
  std::vector<Indexed> out;
  for (const Switch& s : c.switches) {
    std::uint64_t idx = quantize_time(s.time, T, b);
    if (!out.empty() && idx <= out.back().index) {
      const int before = out.size() >= 2 ? out[out.size() - 2].value : c.initial;
      if (s.value == before) {
        out.pop_back();
        continue;
      }
      idx = out.back().index + 1;
      if (idx > max_index) {
        throw CapacityError("switches do not fit on the " + std::to_string(b) +
                            "-bit time grid");
      }
    }
    out.push_back({idx, s.value});
  }
  return out;
}

struct Parsed {
  SwitchingSignal signal;
  BitCount count;
};

inline Parsed parse_packet(const EncodedControl& packet) {
  const std::vector<std::uint8_t>& p = packet.bytes;
  if (p.size() < kHeaderBytes) throw LengthError("packet shorter than header");
  if (p[0] != 'H' || p[1] != 'O') throw FormatError("bad magic");
  if (p[2] != kPacketVersion) {
    throw FormatError("unsupported version " + std::to_string(p[2]));
  }
  const std::size_t m = p[3];
  const int b = p[4];
  std::uint64_t raw = 0;
  for (int i = 7; i >= 0; --i) raw = (raw << 8) | p[5 + static_cast<std::size_t>(i)];
  const double T = std::bit_cast<double>(raw);
  if (m == 0) throw FormatError("channel count is zero");
  if (b < 1 || b > 32) throw FormatError("bits per time out of range");
  if (!std::isfinite(T) || !(T > 0.0)) {
    throw FormatError("horizon is not positive and finite");
  }

  Parsed out;
  out.signal = SwitchingSignal::zero(T, m);
  out.count.header_bits = 8 * kHeaderBytes;
  BitReader in(p.data() + kHeaderBytes, p.size() - kHeaderBytes);
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t start = in.position();
    Channel& ch = out.signal.channels[j];
    const std::uint64_t code = in.get(2);
    if (code == 3) throw ReservedCode("init code 11 is reserved");
    ch.initial = code == 0 ? 0 : (code == 1 ? 1 : -1);
    const std::uint64_t count = in.get(16);
    int prev = ch.initial;
    std::uint64_t last = 0;
    for (std::uint64_t i = 0; i < count; ++i) {
      const std::uint64_t idx = in.get(b);
      if (i > 0 && idx <= last) {
        throw CorruptionError("time indices not strictly increasing");
      }
      last = idx;
      const int value = prev == 0 ? (in.get_bit() ? -1 : 1) : 0;
      ch.switches.push_back({dequantize_time(idx, T, b), value});
      prev = value;
    }
    out.count.payload_bits += in.position() - start;
    in.align();
  }
  if (!in.at_end()) throw LengthError("trailing bytes after payload");
  return out;
}

}  // namespace detail

/// Signal as it comes out of decode(encode(signal, b)).
inline SwitchingSignal quantize(const SwitchingSignal& signal, int b) {
  SwitchingSignal out = SwitchingSignal::zero(signal.T, signal.m());
  for (std::size_t j = 0; j < signal.m(); ++j) {
    out.channels[j].initial = signal.channels[j].initial;
    for (const detail::Indexed& s :
         detail::quantize_channel(signal.channels[j], signal.T, b)) {
      out.channels[j].switches.push_back(
          {detail::dequantize_time(s.index, signal.T, b), s.value});
    }
  }
  return out;
}

inline EncodedControl encode(const SwitchingSignal& signal, int b) {
  if (b < 1 || b > 32) throw InvalidArgument("b must lie in 1..32");
  signal.validate();
  if (signal.m() > 255) throw CapacityError("at most 255 channels fit");
  for (const Channel& c : signal.channels) {
    int prev = c.initial;
    for (const Switch& s : c.switches) {
      if (prev * s.value == -1) {
        throw StructureViolation("direct switch between +1 and -1");
      }
      prev = s.value;
    }
  }

  BitWriter w;
  std::vector<std::uint8_t>& bytes = w.bytes();
  bytes = {'H', 'O', kPacketVersion, static_cast<std::uint8_t>(signal.m()),
           static_cast<std::uint8_t>(b)};
  const auto raw = std::bit_cast<std::uint64_t>(signal.T);
  for (int i = 0; i < 8; ++i) {
    bytes.push_back(static_cast<std::uint8_t>(raw >> (8 * i)));
  }
  for (const Channel& c : signal.channels) {
    const std::vector<detail::Indexed> q =
        detail::quantize_channel(c, signal.T, b);
    if (q.size() > kMaxSwitchesPerChannel) {
      throw CapacityError("more than 65535 switches on one channel");
    }
    w.put(detail::init_code(c.initial), 2);
    w.put(q.size(), 16);
    int prev = c.initial;
    for (const detail::Indexed& s : q) {
      w.put(s.index, b);
      if (prev == 0) w.put_bit(s.value < 0);
      prev = s.value;
    }
    w.align();
  }
  return {std::move(bytes)};
}

inline SwitchingSignal decode(const EncodedControl& packet) {
  return detail::parse_packet(packet).signal;
}

inline BitCount bit_count(const EncodedControl& packet) {
  return detail::parse_packet(packet).count;
}

}  // namespace handsoff
