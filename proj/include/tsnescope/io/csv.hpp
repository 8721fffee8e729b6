#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tsnescope/dataset.hpp"
#include "tsnescope/error.hpp"

namespace tsnescope::io {

namespace detail {

// RFC 4180 records: quoted fields, doubled quotes, CRLF or LF line ends.
inline std::vector<std::vector<std::string>> parse_csv_records(std::string_view text) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false, field_started = false;
  auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    const bool blank = record.size() == 1 && record[0].empty() && !field_started;
    if (!blank) records.push_back(std::move(record));
    record.clear();
    field_started = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        record.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        break;
      default:
        field.push_back(ch);
        field_started = true;
    }
  }
  if (in_quotes) fail(ErrorKind::validation, "unterminated quoted field");
  if (field_started || !field.empty() || !record.empty()) end_record();
  return records;
}

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return std::string(s.substr(first, last - first + 1));
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

inline std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  const char* begin = s.data();
  if (!s.empty() && s[0] == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace detail

// Parses a CSV with a header row. Every column except the label column must be
// numeric. The label column is `label_column` when given, otherwise a column
// named "label" (any case) if present. Rows keep their file order; data rows
// are numbered from 1 in error messages.
inline Dataset ingest_csv(std::string_view bytes, const std::optional<std::string>& label_column = std::nullopt) {
  const auto records = detail::parse_csv_records(bytes);
  if (records.empty()) fail(ErrorKind::validation, "empty CSV: no header row");
  std::vector<std::string> header;
  for (const auto& h : records[0]) header.push_back(detail::trim(h));
  if (records.size() == 1) fail(ErrorKind::validation, "no data rows");
  if (records.size() < 3) fail(ErrorKind::validation, "need at least 2 data rows");

  std::optional<std::size_t> label_idx;
  if (label_column) {
    const auto it = std::find(header.begin(), header.end(), *label_column);
    if (it == header.end()) fail(ErrorKind::validation, "label column '" + *label_column + "' not found");
    label_idx = static_cast<std::size_t>(it - header.begin());
  } else {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (detail::lower(header[c]) == "label") {
        label_idx = c;
        break;
      }
  }

  std::vector<std::size_t> dims;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != label_idx) {
      dims.push_back(c);
      names.push_back(header[c].empty() ? "dim" + std::to_string(c) : header[c]);
    }
  if (dims.empty()) fail(ErrorKind::validation, "no numeric columns");

  const std::size_t rows = records.size() - 1;
  Matrix values(rows, dims.size());
  std::vector<std::string> labels;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& rec = records[r + 1];
    const std::string where = "row " + std::to_string(r + 1);
    if (rec.size() != header.size())
      fail(ErrorKind::validation, where + ": expected " + std::to_string(header.size()) + " fields, found " +
                                      std::to_string(rec.size()));
    for (std::size_t k = 0; k < dims.size(); ++k) {
      const std::string cell = detail::trim(rec[dims[k]]);
      const std::string col = "column '" + names[k] + "'";
      if (cell.empty() || cell == "?" || detail::lower(cell) == "na" || detail::lower(cell) == "nan")
        fail(ErrorKind::validation, "missing value at " + where + ", " + col);
      const auto v = detail::parse_number(cell);
      if (!v || !std::isfinite(*v))
        fail(ErrorKind::validation, "non-numeric value '" + cell + "' at " + where + ", " + col);
      values(r, k) = *v;
    }
    if (label_idx) labels.push_back(detail::trim(rec[*label_idx]));
  }
  std::optional<std::vector<std::string>> label_opt;
  if (label_idx) label_opt = std::move(labels);
  return Dataset::create(std::move(values), std::move(names), std::move(label_opt));
}

}  // namespace tsnescope::io
