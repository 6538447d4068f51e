#pragma once

// Mote telemetry frame: fixed 28 bytes (224 bits), big-endian fields.
//
//   offset  size  field
//   0       2     magic 0xA5 0x5A
//   2       1     version 0x01
//   3       1     node_id
//   4       4     sequence
//   8       8     timestamp_ms
//   16      10    five ADC readings, 16 bits each (light, temp, accel_x, accel_y, voltage)
//   26      2     CRC-16/CCITT-FALSE over bytes 0..25
//
// Frames travel back-to-back on a plain TCP stream. FrameScanner recovers
// frame boundaries from the magic bytes and resynchronizes after corruption.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "smartwsn/error.hpp"
#include "smartwsn/sensors.hpp"

namespace smartwsn {

inline constexpr std::size_t kFrameSize = 28;
inline constexpr std::uint8_t kMagic0 = 0xA5;
inline constexpr std::uint8_t kMagic1 = 0x5A;
inline constexpr std::uint8_t kProtocolVersion = 0x01;
inline constexpr std::uint16_t kAdcMax = 1023;

using FrameBytes = std::array<std::uint8_t, kFrameSize>;

struct RawFrame {
  std::uint8_t node_id = 0;
  std::uint32_t sequence = 0;
  std::uint64_t timestamp_ms = 0;
  std::array<std::uint16_t, kSensorCount> adc{};  // indexed by Sensor

  std::uint16_t reading(Sensor s) const noexcept { return adc[index_of(s)]; }

  friend bool operator==(const RawFrame&, const RawFrame&) = default;
};

enum class FrameErrorKind { BadMagic, BadVersion, BadCrc, Truncated, AdcOutOfRange };

constexpr std::string_view to_string(FrameErrorKind kind) noexcept {
  switch (kind) {
    case FrameErrorKind::BadMagic: return "BadMagic";
    case FrameErrorKind::BadVersion: return "BadVersion";
    case FrameErrorKind::BadCrc: return "BadCrc";
    case FrameErrorKind::Truncated: return "Truncated";
    case FrameErrorKind::AdcOutOfRange: return "AdcOutOfRange";
  }
  return "?";
}

struct FrameError {
  FrameErrorKind kind = FrameErrorKind::BadMagic;
  std::uint64_t offset = 0;  // byte position in the stream

  friend bool operator==(const FrameError&, const FrameError&) = default;
};

using DecodeResult = std::variant<RawFrame, FrameError>;

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no final xor.
/// Table-driven; the table is built at compile time from the polynomial.
inline std::uint16_t crc16(std::span<const std::uint8_t> bytes) noexcept {
  static constexpr auto table = [] {
    std::array<std::uint16_t, 256> t{};
    for (unsigned i = 0; i < 256; ++i) {
      std::uint16_t v = static_cast<std::uint16_t>(i << 8);
      for (int b = 0; b < 8; ++b) {
        v = (v & 0x8000) ? static_cast<std::uint16_t>((v << 1) ^ 0x1021)
                         : static_cast<std::uint16_t>(v << 1);
      }
      t[i] = v;
    }
    return t;
  }();
  std::uint16_t crc = 0xFFFF;
  for (std::uint8_t byte : bytes) {
    crc = static_cast<std::uint16_t>((crc << 8) ^ table[((crc >> 8) ^ byte) & 0xFF]);
  }
  return crc;
}

inline std::uint16_t crc16(std::string_view text) noexcept {
  return crc16(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

namespace wire_detail {

template <typename T>
void put_be(std::uint8_t* out, T value) noexcept {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out[i] = static_cast<std::uint8_t>(value >> (8 * (sizeof(T) - 1 - i)));
  }
}

template <typename T>
T get_be(const std::uint8_t* in) noexcept {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value = static_cast<T>((value << 8) | in[i]);
  return value;
}

}  // namespace wire_detail

/// Throws Error(AdcOutOfRange) if any reading exceeds 1023.
inline FrameBytes encode_frame(const RawFrame& frame) {
  for (Sensor s : kAllSensors) {
    if (frame.reading(s) > kAdcMax) {
      throw Error(ErrorCode::AdcOutOfRange,
                  std::string(sensor_name(s)) + " reading " + std::to_string(frame.reading(s)) +
                      " exceeds 1023");
    }
  }
  using wire_detail::put_be;
  FrameBytes out{};
  out[0] = kMagic0;
  out[1] = kMagic1;
  out[2] = kProtocolVersion;
  out[3] = frame.node_id;
  put_be(out.data() + 4, frame.sequence);
  put_be(out.data() + 8, frame.timestamp_ms);
  for (std::size_t i = 0; i < kSensorCount; ++i) put_be(out.data() + 16 + 2 * i, frame.adc[i]);
  put_be(out.data() + 26, crc16(std::span<const std::uint8_t>(out.data(), 26)));
  return out;
}

/// Validates magic, version, CRC and ADC bounds in that order. `offset` is
/// only used to label a returned FrameError.
inline DecodeResult decode_frame(std::span<const std::uint8_t> bytes, std::uint64_t offset = 0) {
  using wire_detail::get_be;
  if (bytes.size() != kFrameSize) return FrameError{FrameErrorKind::Truncated, offset};
  if (bytes[0] != kMagic0 || bytes[1] != kMagic1) return FrameError{FrameErrorKind::BadMagic, offset};
  if (bytes[2] != kProtocolVersion) return FrameError{FrameErrorKind::BadVersion, offset};
  if (crc16(bytes.first(26)) != get_be<std::uint16_t>(bytes.data() + 26)) {
    return FrameError{FrameErrorKind::BadCrc, offset};
  }
  RawFrame frame;
  frame.node_id = bytes[3];
  frame.sequence = get_be<std::uint32_t>(bytes.data() + 4);
  frame.timestamp_ms = get_be<std::uint64_t>(bytes.data() + 8);
  for (std::size_t i = 0; i < kSensorCount; ++i) {
    frame.adc[i] = get_be<std::uint16_t>(bytes.data() + 16 + 2 * i);
    if (frame.adc[i] > kAdcMax) return FrameError{FrameErrorKind::AdcOutOfRange, offset};
  }
  return frame;
}

/// Incremental stream scanner. Feed it arbitrary chunks; it returns every
/// frame or error completed by that chunk. A failed decode advances a single
/// byte, so a valid frame that follows garbage is never skipped.
/// Single consumer; not thread-safe.
class FrameScanner {
 public:
  using Item = DecodeResult;

  std::vector<Item> feed(std::span<const std::uint8_t> chunk) {
    buffer_.insert(buffer_.end(), chunk.begin(), chunk.end());
    std::vector<Item> out;
    std::size_t pos = 0;
    while (true) {
      std::size_t start = find_magic(pos);
      if (start == npos) {
        // Keep a trailing first magic byte; its partner may be in the next chunk.
        pos = (!buffer_.empty() && buffer_.back() == kMagic0) ? buffer_.size() - 1 : buffer_.size();
        break;
      }
      if (buffer_.size() - start < kFrameSize) {
        pos = start;
        break;
      }
      auto result = decode_frame(std::span<const std::uint8_t>(buffer_.data() + start, kFrameSize),
                                 consumed_ + start);
      if (std::holds_alternative<RawFrame>(result)) {
        pos = start + kFrameSize;
      } else {
        pos = start + 1;
      }
      out.push_back(std::move(result));
    }
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(pos));
    consumed_ += pos;
    return out;
  }

  /// End of stream: a pending partial frame becomes a Truncated error.
  std::vector<Item> finish() {
    std::vector<Item> out;
    std::size_t start = find_magic(0);
    if (start != npos) out.emplace_back(FrameError{FrameErrorKind::Truncated, consumed_ + start});
    consumed_ += buffer_.size();
    buffer_.clear();
    return out;
  }

  std::size_t buffered() const noexcept { return buffer_.size(); }
  std::uint64_t consumed() const noexcept { return consumed_; }

 private:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t find_magic(std::size_t from) const noexcept {
    for (std::size_t i = from; i + 1 < buffer_.size(); ++i) {
      if (buffer_[i] == kMagic0 && buffer_[i + 1] == kMagic1) return i;
    }
    return npos;
  }

  std::vector<std::uint8_t> buffer_;
  std::uint64_t consumed_ = 0;
};

/// Whole-buffer convenience wrapper around FrameScanner.
inline std::vector<DecodeResult> scan_stream(std::span<const std::uint8_t> bytes) {
  FrameScanner scanner;
  auto items = scanner.feed(bytes);
  auto tail = scanner.finish();
  items.insert(items.end(), tail.begin(), tail.end());
  return items;
}

}  // namespace smartwsn
