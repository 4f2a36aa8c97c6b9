#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>

namespace tpar {

using EntityId = std::int32_t;
using RelationId = std::int32_t;
using TimeIndex = std::int64_t;

enum class Regime { interpolation, extrapolation };

const char* to_string(Regime regime) noexcept;

// One temporal fact (subject, relation, object, time).
struct Quadruple {
  EntityId subject = 0;
  RelationId relation = 0;
  EntityId object = 0;
  TimeIndex time = 0;

  friend auto operator<=>(const Quadruple&, const Quadruple&) = default;
};

struct QuadrupleHash {
  std::size_t operator()(const Quadruple& q) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(static_cast<std::uint32_t>(q.subject));
    h = h * 0x100000001b3ULL ^ static_cast<std::uint32_t>(q.relation);
    h = h * 0x100000001b3ULL ^ static_cast<std::uint32_t>(q.object);
    h = h * 0x100000001b3ULL ^ static_cast<std::uint64_t>(q.time);
    return std::hash<std::uint64_t>{}(h ^ (h >> 29));
  }
};

}  // namespace tpar
