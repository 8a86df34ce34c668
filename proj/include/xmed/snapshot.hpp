#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "xmed/engine.hpp"
#include "xmed/errors.hpp"
#include "xmed/grid.hpp"

namespace xmed {

// Snapshot/checkpoint file, bit-exact layout:
//   magic "XMED", version u32 = 1, then little-endian:
//   ndim u32, shape u64 x ndim, spacing f64, origin f64 x ndim,
//   time f64, step_count u64, u f64 x n, v f64 x n,
//   mask u8 x n (1 = active), all row-major last-axis-fastest.
inline constexpr std::uint32_t kSnapshotVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "snapshot format is little-endian");

namespace detail {

template <typename T>
void write_pod(std::ostream& os, const T& value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

}  // namespace detail

inline void write_snapshot(const std::string& path, const FieldState& state,
                           const ConductionMask& mask) {
  if (!mask.grid().same_lattice(state.grid))
    throw ContractError("write_snapshot: mask grid mismatch");
  for (NodeIndex i = 0; i < state.grid.node_count(); ++i) {
    if (!(std::isfinite(state.u[i]) && std::isfinite(state.v[i])))
      throw DivergenceError(state.step_count, i);
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError("cannot open for writing: " + path);
  os.write("XMED", 4);
  detail::write_pod(os, kSnapshotVersion);
  detail::write_pod(os, static_cast<std::uint32_t>(state.grid.ndim()));
  for (auto n : state.grid.shape())
    detail::write_pod(os, static_cast<std::uint64_t>(n));
  detail::write_pod(os, state.grid.spacing());
  for (auto o : state.grid.origin()) detail::write_pod(os, o);
  detail::write_pod(os, state.t);
  detail::write_pod(os, static_cast<std::uint64_t>(state.step_count));
  os.write(reinterpret_cast<const char*>(state.u.data()),
           static_cast<std::streamsize>(state.u.size() * sizeof(double)));
  os.write(reinterpret_cast<const char*>(state.v.data()),
           static_cast<std::streamsize>(state.v.size() * sizeof(double)));
  os.write(reinterpret_cast<const char*>(mask.data().data()),
           static_cast<std::streamsize>(mask.data().size()));
  if (!os) throw ConfigError("write failed: " + path);
}

inline std::pair<FieldState, ConductionMask> read_snapshot(
    const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open snapshot: " + path);
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "XMED", 4) != 0)
    throw ConfigError("not an XMED snapshot: " + path);
  const auto version = detail::read_pod<std::uint32_t>(is);
  if (version != kSnapshotVersion)
    throw ConfigError("unsupported snapshot version " +
                      std::to_string(version) + ": " + path);
  const auto ndim = detail::read_pod<std::uint32_t>(is);
  if (ndim == 0 || ndim > 16) throw ConfigError("corrupt snapshot: " + path);
  std::vector<std::int64_t> shape(ndim);
  for (auto& n : shape)
    n = static_cast<std::int64_t>(detail::read_pod<std::uint64_t>(is));
  const double spacing = detail::read_pod<double>(is);
  std::vector<double> origin(ndim);
  for (auto& o : origin) o = detail::read_pod<double>(is);
  const double t = detail::read_pod<double>(is);
  const auto step_count = detail::read_pod<std::uint64_t>(is);
  if (!is) throw ConfigError("truncated snapshot: " + path);

  GridSpec grid(shape, spacing, origin);
  const NodeIndex n = grid.node_count();
  FieldState st{grid, std::vector<double>(n), std::vector<double>(n), t,
                step_count};
  is.read(reinterpret_cast<char*>(st.u.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  is.read(reinterpret_cast<char*>(st.v.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  std::vector<std::uint8_t> active(n);
  is.read(reinterpret_cast<char*>(active.data()),
          static_cast<std::streamsize>(n));
  if (!is) throw ConfigError("truncated snapshot: " + path);
  return {std::move(st), ConductionMask(grid, std::move(active))};
}

}  // namespace xmed
