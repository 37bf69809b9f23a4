#pragma once

// File formats: CSV tables, instance headers, raw energy and state dumps.

#include <bit>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "qrem/errors.hpp"
#include "qrem/hamiltonian.hpp"
#include "qrem/rem.hpp"
#include "qrem/rng.hpp"

namespace qrem {

using Json = nlohmann::ordered_json;

// Shortest text that reads back to the same double.
inline std::string format_number(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  if (res.ec != std::errc{}) throw NumericError("cannot format number");
  return std::string(buf, res.ptr);
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string> columns)
      : path_(path), columns_(columns.size()) {
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw Error("cannot open " + path.string() + " for writing");
    write_fields(std::vector<std::string>(columns));
  }

  template <typename... Ts>
  void row(const Ts&... values) {
    if (sizeof...(Ts) != columns_) throw DimensionError("CSV row width does not match header of " + path_.string());
    write_fields(std::vector<std::string>{to_field(values)...});
  }

  void close() {
    out_.close();
    if (!out_) throw Error("failed writing " + path_.string());
  }

 private:
  template <typename T>
  static std::string to_field(const T& v) {
    if constexpr (std::is_same_v<T, std::string>) {
      return v;
    } else if constexpr (std::is_same_v<T, bool>) {
      return v ? "1" : "0";
    } else if constexpr (std::is_floating_point_v<T>) {
      return format_number(static_cast<double>(v));
    } else if constexpr (std::is_signed_v<T>) {
      return std::to_string(static_cast<long long>(v));
    } else {
      return std::to_string(static_cast<unsigned long long>(v));
    }
  }

  void write_fields(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << fields[i];
    }
    out_ << '\n';
  }

  std::filesystem::path path_;
  std::size_t columns_;
  std::ofstream out_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

namespace detail {

inline void put_le(std::ofstream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

inline double get_le(const unsigned char* bytes) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t{bytes[i]} << (8 * i);
  return std::bit_cast<double>(bits);
}

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

// Sampled instances are described by their header alone; the energies are
// regenerated from (n, seed). Crafted instances carry their energies.
inline Json instance_header(const RemInstance& inst) {
  Json j;
  j["n"] = inst.n();
  if (inst.crafted()) {
    j["energies"] = std::vector<double>(inst.energies().begin(), inst.energies().end());
  } else {
    j["seed"] = inst.seed();
    j["rng_version"] = kRngVersion;
  }
  return j;
}

inline RemInstance instance_from_header(const Json& j) {
  if (j.contains("energies")) return RemInstance::from_energies(j.at("energies").get<std::vector<double>>());
  const int version = j.value("rng_version", kRngVersion);
  if (version != kRngVersion) {
    throw DomainError("instance was generated with rng_version " + std::to_string(version) + ", this build has " +
                      std::to_string(kRngVersion));
  }
  return RemInstance::sample(j.at("n").get<int>(), j.at("seed").get<std::uint64_t>());
}

inline void export_energies(const RemInstance& inst, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (double e : inst.energies()) detail::put_le(out, e);
  if (!out) throw Error("failed writing " + path.string());
}

inline std::vector<double> import_energies(const std::filesystem::path& path) {
  const auto bytes = detail::read_bytes(path);
  if (bytes.size() % 8 != 0) throw DimensionError(path.string() + " is not a whole number of float64 values");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::get_le(bytes.data() + 8 * i);
  return out;
}

// Writes <stem>.bin with (re, im) pairs and <stem>.json with {n, gamma, time}.
inline void write_state_snapshot(const QuantumState& state, double gamma, double time,
                                 const std::filesystem::path& stem) {
  std::filesystem::path bin = stem;
  bin += ".bin";
  std::ofstream out(bin, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + bin.string() + " for writing");
  for (const Complex& z : state.amplitudes) {
    detail::put_le(out, z.real());
    detail::put_le(out, z.imag());
  }
  if (!out) throw Error("failed writing " + bin.string());
  Json side;
  side["n"] = state.n;
  side["gamma"] = gamma;
  side["time"] = time;
  std::filesystem::path meta = stem;
  meta += ".json";
  write_json(meta, side);
}

struct StateSnapshot {
  QuantumState state;
  double gamma = 0.0;
  double time = 0.0;
};

inline StateSnapshot read_state_snapshot(const std::filesystem::path& stem) {
  std::filesystem::path meta = stem;
  meta += ".json";
  std::ifstream in(meta);
  if (!in) throw Error("cannot open " + meta.string());
  const Json side = Json::parse(in);
  StateSnapshot snap;
  snap.gamma = side.at("gamma").get<double>();
  snap.time = side.at("time").get<double>();
  const int n = side.at("n").get<int>();
  RemInstance::check_spins(n);
  std::filesystem::path bin = stem;
  bin += ".bin";
  const auto bytes = detail::read_bytes(bin);
  if (bytes.size() != 16 * basis_size(n)) throw DimensionError(bin.string() + " does not hold 2^n amplitudes");
  std::vector<Complex> amps(basis_size(n));
  for (std::size_t a = 0; a < amps.size(); ++a) {
    amps[a] = {detail::get_le(bytes.data() + 16 * a), detail::get_le(bytes.data() + 16 * a + 8)};
  }
  snap.state = QuantumState(n, std::move(amps));
  return snap;
}

}  // namespace qrem
