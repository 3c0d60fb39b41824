#pragma once

// Density-matrix dump formats.
//
// Binary (little-endian):
//   bytes 0..3   magic "PSDM"
//   bytes 4..7   uint32 format version (1)
//   bytes 8..11  uint32 per-mode cutoff n_c
//   then D*D pairs of float64 (real, imag), row-major, D = (n_c+1)^2,
//   flat index of |n,m> is n*(n_c+1)+m.
//
// JSON: {"format":"psgen-density-matrix","version":1,"n_c":..,"dim":..,
//        "index_order":"n*(n_c+1)+m","re":[[..]..],"im":[[..]..], "meta":{..}}

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "json.hpp"
#include "psgen/common/error.hpp"
#include "psgen/fock/state.hpp"

namespace psgen::fock {

namespace detail {

static_assert(std::endian::native == std::endian::little, "dump I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("truncated density-matrix dump");
  return v;
}

}  // namespace detail

inline void write_binary(std::ostream& os, const TwoModeState& state) {
  os.write("PSDM", 4);
  detail::put<std::uint32_t>(os, 1);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(state.cutoff()));
  const auto& rho = state.matrix();
  for (int i = 0; i < state.dim(); ++i)
    for (int j = 0; j < state.dim(); ++j) {
      detail::put<double>(os, rho(i, j).real());
      detail::put<double>(os, rho(i, j).imag());
    }
}

inline TwoModeState read_binary(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "PSDM", 4) != 0) throw FormatError("not a PSDM density-matrix dump");
  if (detail::get<std::uint32_t>(is) != 1) throw FormatError("unsupported PSDM version");
  const int n_c = static_cast<int>(detail::get<std::uint32_t>(is));
  if (n_c > 64) throw FormatError("implausible cutoff in PSDM dump");
  const int d = (n_c + 1) * (n_c + 1);
  Matrix rho(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const double re = detail::get<double>(is);
      const double im = detail::get<double>(is);
      rho(i, j) = Complex(re, im);
    }
  return TwoModeState(n_c, rho);
}

inline nlohmann::json to_json(const TwoModeState& state, const nlohmann::json& meta = nlohmann::json::object()) {
  nlohmann::json re = nlohmann::json::array();
  nlohmann::json im = nlohmann::json::array();
  for (int i = 0; i < state.dim(); ++i) {
    nlohmann::json rr = nlohmann::json::array();
    nlohmann::json ii = nlohmann::json::array();
    for (int j = 0; j < state.dim(); ++j) {
      rr.push_back(state(i, j).real());
      ii.push_back(state(i, j).imag());
    }
    re.push_back(std::move(rr));
    im.push_back(std::move(ii));
  }
  return {{"format", "psgen-density-matrix"}, {"version", 1},        {"n_c", state.cutoff()},
          {"dim", state.dim()},               {"index_order", "n*(n_c+1)+m"}, {"re", re},
          {"im", im},                         {"meta", meta}};
}

inline TwoModeState from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "psgen-density-matrix") throw FormatError("not a psgen density-matrix document");
  const int n_c = j.at("n_c").get<int>();
  const int d = (n_c + 1) * (n_c + 1);
  const auto& re = j.at("re");
  const auto& im = j.at("im");
  if (static_cast<int>(re.size()) != d || static_cast<int>(im.size()) != d)
    throw FormatError("density-matrix rows do not match the cutoff");
  Matrix rho(d, d);
  for (int i = 0; i < d; ++i) {
    if (static_cast<int>(re[i].size()) != d || static_cast<int>(im[i].size()) != d)
      throw FormatError("density-matrix columns do not match the cutoff");
    for (int k = 0; k < d; ++k) rho(i, k) = Complex(re[i][k].get<double>(), im[i][k].get<double>());
  }
  return TwoModeState(n_c, rho);
}

inline void save_binary(const std::string& path, const TwoModeState& state) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  write_binary(os, state);
}

inline TwoModeState load_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  return read_binary(is);
}

}  // namespace psgen::fock
