#pragma once

// Dataset CSV: a header naming the columns (x_0.., t_0.. or t_class, s_0..),
// then one sample per row. Values use the shortest round-trip decimal form.
// A `<file>.meta.json` sidecar carries generator id, parameters and seed.
//
// An fECG record is stored one time step per row: x_i are abdominal
// channels, t_i thorax channels, s_0 the fetal train and m_0 the maternal
// train. Segment offsets and periods live in the sidecar.

#include <charconv>
#include <filesystem>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "icarec/datagen.hpp"
#include "icarec/io.hpp"

namespace icarec::data {

inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::filesystem::path meta_path(const std::filesystem::path& csv) {
  std::filesystem::path p = csv;
  p += ".meta.json";
  return p;
}

namespace detail {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline Table parse_table(const std::string& text, const std::string& what) {
  Table tab;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const std::size_t line_start = pos;
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (tab.header.empty()) {
      for (auto c : cells) tab.header.emplace_back(c);
      continue;
    }
    if (cells.size() != tab.header.size()) {
      throw ParseError(what + ": line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                           " fields, header has " + std::to_string(tab.header.size()),
                       line_start);
    }
    std::vector<double> row(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto c = cells[i];
      const auto r = std::from_chars(c.data(), c.data() + c.size(), row[i]);
      if (r.ec != std::errc() || r.ptr != c.data() + c.size()) {
        throw ParseError(what + ": line " + std::to_string(line_no) + ": bad number '" + std::string(c) + "'",
                         line_start + static_cast<std::size_t>(c.data() - line.data()));
      }
    }
    tab.rows.push_back(std::move(row));
  }
  if (tab.header.empty()) throw ParseError(what + ": empty file", 0);
  return tab;
}

inline std::vector<std::size_t> columns_with_prefix(const std::vector<std::string>& header, const std::string& prefix) {
  std::vector<std::size_t> idx;
  for (std::size_t k = 0;; ++k) {
    const std::string name = prefix + std::to_string(k);
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) break;
    idx.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  return idx;
}

inline Tensor column_block(const Table& tab, const std::vector<std::size_t>& cols) {
  std::vector<double> v;
  v.reserve(tab.rows.size() * cols.size());
  for (const auto& r : tab.rows)
    for (std::size_t c : cols) v.push_back(r[c]);
  return Tensor({tab.rows.size(), cols.size()}, std::move(v));
}

// (rows, cols) -> (cols, rows)
inline Tensor transpose(const Tensor& t) {
  const std::size_t r = t.dim(0), c = t.dim(1);
  std::vector<double> v(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) v[j * r + i] = t[i * c + j];
  return Tensor({c, r}, std::move(v));
}

inline std::size_t row_width(const Tensor& t) { return t.numel() / t.dim(0); }

}  // namespace detail

inline std::string dataset_to_csv(const PairedDataset& d) {
  std::ostringstream os;
  if (d.record) {
    const FecgRecord& r = *d.record;
    const std::size_t na = r.abdominal.dim(0), nt = r.thorax.dim(0), len = r.length();
    for (std::size_t i = 0; i < na; ++i) os << "x_" << i << ',';
    for (std::size_t i = 0; i < nt; ++i) os << "t_" << i << ',';
    os << "s_0,m_0\n";
    for (std::size_t k = 0; k < len; ++k) {
      for (std::size_t i = 0; i < na; ++i) os << format_double(r.abdominal[i * len + k]) << ',';
      for (std::size_t i = 0; i < nt; ++i) os << format_double(r.thorax[i * len + k]) << ',';
      os << format_double(r.fetal[k]) << ',' << format_double(r.maternal[k]) << '\n';
    }
    return os.str();
  }
  const Pairs& p = d.pairs;
  const std::size_t n = p.size();
  const std::size_t wx = detail::row_width(p.x);
  const std::size_t wt = p.t ? detail::row_width(*p.t) : 0;
  const std::size_t ws = d.s ? detail::row_width(*d.s) : 0;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < wx; ++i) names.push_back("x_" + std::to_string(i));
  if (p.symbolic()) names.push_back("t_class");
  for (std::size_t i = 0; i < wt; ++i) names.push_back("t_" + std::to_string(i));
  for (std::size_t i = 0; i < ws; ++i) names.push_back("s_" + std::to_string(i));
  for (std::size_t i = 0; i < names.size(); ++i) os << (i ? "," : "") << names[i];
  os << '\n';
  for (std::size_t r = 0; r < n; ++r) {
    bool first = true;
    auto put = [&](double v) {
      os << (first ? "" : ",") << format_double(v);
      first = false;
    };
    for (std::size_t i = 0; i < wx; ++i) put(p.x[r * wx + i]);
    if (p.symbolic()) put(static_cast<double>(p.t_class[r]));
    for (std::size_t i = 0; i < wt; ++i) put((*p.t)[r * wt + i]);
    for (std::size_t i = 0; i < ws; ++i) put((*d.s)[r * ws + i]);
    os << '\n';
  }
  return os.str();
}

/// Rebuilds the fECG training segments from a record and its sidecar.
inline PairedDataset fecg_from_record(FecgRecord r, const nlohmann::json& meta) {
  const auto offsets = meta.at("segment_offsets").get<std::vector<std::size_t>>();
  const auto length = meta.at("segment_length").get<std::size_t>();
  PairedDataset d = segment_record(r, offsets, length);
  d.record = std::move(r);
  d.meta = meta;
  return d;
}

inline PairedDataset dataset_from_csv(const std::string& text, nlohmann::json meta, const std::string& what) {
  if (meta.is_null()) meta = nlohmann::json::object();
  if (!meta.is_object()) throw ConfigError(what + ": dataset meta must be a JSON object");
  const detail::Table tab = detail::parse_table(text, what);
  if (tab.rows.empty()) throw ParseError(what + ": no data rows", text.size());
  const auto xs = detail::columns_with_prefix(tab.header, "x_");
  const auto ts = detail::columns_with_prefix(tab.header, "t_");
  const auto ss = detail::columns_with_prefix(tab.header, "s_");
  const auto ms = detail::columns_with_prefix(tab.header, "m_");
  const auto cls = std::find(tab.header.begin(), tab.header.end(), "t_class");
  const std::size_t known = xs.size() + ts.size() + ss.size() + ms.size() + (cls != tab.header.end() ? 1 : 0);
  if (xs.empty()) throw ParseError(what + ": header has no x_ columns", 0);
  if (known != tab.header.size()) throw ParseError(what + ": header has unrecognised columns", 0);

  if (meta.value("generator", "") == "fecg") {
    if (ts.empty() || ss.size() != 1 || ms.size() != 1) {
      throw ParseError(what + ": fecg record needs t_ columns, s_0 and m_0", 0);
    }
    FecgRecord r;
    r.abdominal = detail::transpose(detail::column_block(tab, xs));
    r.thorax = detail::transpose(detail::column_block(tab, ts));
    r.fetal = detail::column_block(tab, ss).reshaped({tab.rows.size()});
    r.maternal = detail::column_block(tab, ms).reshaped({tab.rows.size()});
    const auto& params = meta.at("params");
    r.tau_m = params.at("tau_m").get<std::size_t>();
    r.tau_f = params.at("tau_f").get<std::size_t>();
    return fecg_from_record(std::move(r), meta);
  }

  PairedDataset d;
  d.pairs.x = detail::column_block(tab, xs);
  if (!ts.empty()) d.pairs.t = detail::column_block(tab, ts);
  if (cls != tab.header.end()) {
    const auto c = static_cast<std::size_t>(cls - tab.header.begin());
    for (const auto& row : tab.rows) {
      const double v = row[c];
      if (!(v >= 0.0) || v != std::floor(v)) throw ParseError(what + ": t_class must be a nonnegative integer", 0);
      d.pairs.t_class.push_back(static_cast<std::size_t>(v));
      d.pairs.num_classes = std::max(d.pairs.num_classes, d.pairs.t_class.back() + 1);
    }
    d.pairs.num_classes = meta.value("num_classes", d.pairs.num_classes);
  }
  if (!ss.empty()) d.s = detail::column_block(tab, ss);
  d.meta = meta;
  return d;
}

inline void write_dataset(const PairedDataset& d, const std::filesystem::path& csv) {
  io::write_file_atomic(csv, dataset_to_csv(d));
  io::write_json(meta_path(csv), d.meta);
}

inline PairedDataset read_dataset(const std::filesystem::path& csv) {
  const std::string text = io::read_file(csv);
  nlohmann::json meta = nlohmann::json::object();
  if (std::filesystem::exists(meta_path(csv))) meta = io::read_json(meta_path(csv));
  return dataset_from_csv(text, meta, csv.string());
}

/// Pairs a trainer consumes: the hidden source is dropped.
inline Pairs training_view(const PairedDataset& d) { return d.pairs; }

}  // namespace icarec::data
