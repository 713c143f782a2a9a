// Copyright 2026 The nsg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "nsg/table_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "nsg/error.hpp"

namespace nsg {

namespace {

void write_cells(std::ostream& out, std::span<const Element> cells) {
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (c) out << ' ';
    out << static_cast<unsigned>(cells[c]);
  }
  out << '\n';
}

std::size_t read_header(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw MalformedFile("missing `n=` header line");
  if (line.rfind("n=", 0) != 0) {
    throw MalformedFile("expected `n=<cardinality>` header, got '" + line + "'");
  }
  std::size_t n = 0;
  const char* first = line.data() + 2;
  const char* last = line.data() + line.size();
  auto [ptr, ec] = std::from_chars(first, last, n);
  if (ec != std::errc{} || ptr != last || n == 0 || n > kMaxCardinality) {
    throw MalformedFile("bad cardinality in header '" + line + "'");
  }
  return n;
}

// Parse one line of n^2 integers in [lo, n].
std::vector<Element> parse_line(const std::string& line, std::size_t n,
                                unsigned lo, std::size_t line_no) {
  std::vector<Element> cells;
  cells.reserve(n * n);
  const char* p = line.data();
  const char* end = line.data() + line.size();
  while (p < end) {
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
    if (p == end) break;
    unsigned v = 0;
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc{}) {
      throw MalformedFile("line " + std::to_string(line_no) +
                          ": non-integer cell");
    }
    if (v < lo || v > n) {
      throw MalformedFile("line " + std::to_string(line_no) + ": cell value " +
                          std::to_string(v) + " outside " +
                          std::to_string(lo) + ".." + std::to_string(n));
    }
    cells.push_back(static_cast<Element>(v));
    p = next;
  }
  if (cells.size() != n * n) {
    throw MalformedFile("line " + std::to_string(line_no) + ": expected " +
                        std::to_string(n * n) + " cells, got " +
                        std::to_string(cells.size()));
  }
  return cells;
}

template <typename Table, typename File>
File read_any(std::istream& in, unsigned lo) {
  File file;
  file.n = read_header(in);
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    file.tables.emplace_back(file.n, parse_line(line, file.n, lo, line_no));
  }
  return file;
}

template <typename Table>
void write_any(std::ostream& out, std::size_t n, std::span<const Table> tables) {
  out << "n=" << n << '\n';
  for (const auto& t : tables) {
    if (t.size() != n) {
      throw DimensionMismatch("table of cardinality " +
                              std::to_string(t.size()) +
                              " in a file declared n=" + std::to_string(n));
    }
    write_cells(out, t.cells());
  }
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace

void write_tables(std::ostream& out, std::size_t n,
                  std::span<const CayleyTable> tables) {
  write_any(out, n, tables);
}

void write_partials(std::ostream& out, std::size_t n,
                    std::span<const PartialTable> tables) {
  write_any(out, n, tables);
}

TableFile read_tables(std::istream& in) {
  return read_any<CayleyTable, TableFile>(in, 1);
}

PartialFile read_partials(std::istream& in) {
  return read_any<PartialTable, PartialFile>(in, 0);
}

void write_tables(const std::filesystem::path& path, std::size_t n,
                  std::span<const CayleyTable> tables) {
  auto out = open_out(path);
  write_tables(out, n, tables);
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

void write_partials(const std::filesystem::path& path, std::size_t n,
                    std::span<const PartialTable> tables) {
  auto out = open_out(path);
  write_partials(out, n, tables);
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

TableFile read_tables(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_tables(in);
}

PartialFile read_partials(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_partials(in);
}

}  // namespace nsg
