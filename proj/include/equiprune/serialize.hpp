#pragma once

/**
 * JSON and CSV serialization for bases, networks, prune reports, and
 * diamond masks. All writers produce byte-identical output for identical
 * inputs: JSON objects order keys lexicographically (nlohmann's default
 * object storage), doubles in CSV cells go through format_double, and
 * files are written in binary mode with a fixed "\n" line ending.
 */

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "equiprune/basis.hpp"
#include "equiprune/network.hpp"
#include "equiprune/pruner.hpp"

namespace equiprune {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// small primitives

/// Fixed-width lowercase hex of a content hash; JSON-safe for 64-bit values.
inline std::string hash_string(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return s;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open file for writing: " + path.string());
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw Error("failed writing file: " + path.string());
}

inline void write_json_file(const std::filesystem::path& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// CSV

/// Joins cells with commas. Cells are produced by the callers from a fixed
/// vocabulary (names, integers, format_double output), so no quoting is
/// needed; a comma inside a cell is a caller bug worth failing loudly on.
inline std::string csv_line(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].find(',') != std::string::npos || cells[i].find('\n') != std::string::npos)
      throw Error("csv cell contains a separator: " + cells[i]);
    if (i) line += ',';
    line += cells[i];
  }
  return line;
}

inline void write_csv(const std::filesystem::path& path,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::string out = csv_line(header) + "\n";
  for (const auto& r : rows) {
    if (r.size() != header.size()) throw Error("csv row width does not match header");
    out += csv_line(r) + "\n";
  }
  write_text_file(path, out);
}

// ---------------------------------------------------------------------------
// bases

inline Json group_to_json(const GroupSpec& g) {
  Json j;
  j["kind"] = group_kind_name(g.kind);
  j["n"] = g.n;
  return j;
}

inline Json space_to_json(const FeatureSpace& s) {
  Json j;
  j["group"] = group_to_json(s.rep.group);
  j["rep"] = rep_kind_name(s.rep.kind);
  j["block_dim"] = s.block_dim;
  j["grid_side"] = s.grid_side;
  return j;
}

inline Json element_to_json(const BasisElement& el) {
  Json j;
  if (el.is_kernel) {
    j["form"] = "kernel";
    j["d"] = el.kernel.d;
    j["ch_out"] = el.kernel.ch_out;
    j["ch_in"] = el.kernel.ch_in;
    Json entries = Json::array();
    for (const auto& e : el.kernel.entries)
      entries.push_back(Json::array({e.pix, e.co, e.ci, e.v}));
    j["entries"] = std::move(entries);
  } else {
    j["form"] = "dense";
    j["rows"] = static_cast<int>(el.dense.rows());
    j["cols"] = static_cast<int>(el.dense.cols());
    Json values = Json::array();
    for (Eigen::Index r = 0; r < el.dense.rows(); ++r)
      for (Eigen::Index c = 0; c < el.dense.cols(); ++c) values.push_back(el.dense(r, c));
    j["values"] = std::move(values);
  }
  return j;
}

inline Json basis_to_json(const EquivariantBasis& b) {
  Json j;
  j["in_space"] = space_to_json(b.in_space);
  j["out_space"] = space_to_json(b.out_space);
  j["cardinality"] = b.cardinality();
  j["identity_index"] = b.identity_index;
  j["op_norm_bound"] = b.op_norm_bound;
  j["hash"] = hash_string(basis_hash(b));
  Json elements = Json::array();
  for (const auto& el : b.elements) elements.push_back(element_to_json(el));
  j["elements"] = std::move(elements);
  return j;
}

// ---------------------------------------------------------------------------
// networks

/// Layers reference their basis by content hash instead of inlining it;
/// the basis export (basis_to_json) is the authoritative companion file.
inline Json layer_to_json(const CoefficientLayer& layer) {
  Json j;
  j["basis_hash"] = hash_string(basis_hash(*layer.basis));
  j["n_in"] = layer.n_in;
  j["n_out"] = layer.n_out;
  Json coeffs = Json::array();
  for (Eigen::Index i = 0; i < layer.coeffs.size(); ++i) coeffs.push_back(layer.coeffs[i]);
  j["coeffs"] = std::move(coeffs);
  return j;
}

inline Json network_to_json(const EquivariantNetwork& net) {
  Json j;
  Json layers = Json::array();
  for (const auto& l : net.layers) layers.push_back(layer_to_json(l));
  j["layers"] = std::move(layers);
  return j;
}

// ---------------------------------------------------------------------------
// prune reports

inline Json layer_stats_to_json(const LayerPruneStats& st) {
  Json j;
  j["tolerance"] = st.tolerance;
  j["layer_bound"] = st.layer_bound;
  j["failures"] = st.failures;
  j["instances"] = st.instances;
  j["truncated_instances"] = st.truncated_instances;
  return j;
}

inline Json report_to_json(const PruneReport& rep) {
  Json j;
  j["epsilon"] = rep.epsilon;
  j["delta"] = rep.delta;
  j["overparam_constant"] = rep.overparam_constant;
  j["network_bound"] = rep.network_bound;
  j["budget_ceiling"] = rep.budget_ceiling;
  j["recursion_check"] = rep.recursion_check;
  j["total_failures"] = rep.total_failures;
  j["sampled_abs_error"] = rep.sampled_abs_error;
  j["sampled_rel_error"] = rep.sampled_rel_error;
  j["target_params"] = rep.target_params;
  j["overparam_params"] = rep.overparam_params;
  j["pruned_params"] = rep.pruned_params;
  j["ratio_overparam"] = rep.ratio_overparam;
  j["ratio_pruned"] = rep.ratio_pruned;
  Json layers = Json::array();
  for (const auto& st : rep.layers) layers.push_back(layer_stats_to_json(st));
  j["layers"] = std::move(layers);
  return j;
}

// ---------------------------------------------------------------------------
// diamond masks

/**
 * Binary export of all diamond masks of a pruned network: one byte per
 * coefficient (0 or 1), blocks in network order, within a block the first
 * mask then the second, each flat in coefficient order
 * (out block, in block, element) — the CoefficientLayer layout.
 * Returns the JSON sidecar describing every section of the blob.
 */
inline Json write_mask_blob(const std::filesystem::path& path,
                            const std::vector<DiamondBlock>& blocks,
                            const std::string& stored_name) {
  std::string blob;
  Json sections = Json::array();
  auto add = [&](const std::vector<std::uint8_t>& mask, const CoefficientLayer& layer) {
    Json s;
    s["offset"] = static_cast<std::int64_t>(blob.size());
    s["count"] = static_cast<std::int64_t>(mask.size());
    s["shape"] = Json::array({layer.n_out, layer.n_in, layer.basis->cardinality()});
    long long ones = 0;
    for (std::uint8_t m : mask) ones += m;
    s["ones"] = ones;
    blob.append(reinterpret_cast<const char*>(mask.data()), mask.size());
    return s;
  };
  for (const auto& b : blocks) {
    Json entry;
    entry["first"] = add(b.mask_first, b.first);
    entry["second"] = add(b.mask_second, b.second);
    sections.push_back(std::move(entry));
  }
  write_text_file(path, blob);
  Json sidecar;
  sidecar["file"] = stored_name;
  sidecar["order"] = "byte per coefficient; (out block, in block, element), element fastest";
  sidecar["blocks"] = std::move(sections);
  return sidecar;
}

inline std::vector<std::uint8_t> read_mask_section(const std::filesystem::path& path,
                                                   std::int64_t offset, std::int64_t count) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open mask blob: " + path.string());
  f.seekg(offset);
  std::vector<std::uint8_t> out(static_cast<std::size_t>(count));
  f.read(reinterpret_cast<char*>(out.data()), count);
  if (!f) throw Error("mask blob truncated: " + path.string());
  return out;
}

}  // namespace equiprune
