/*
 * Copyright 2026 The MBNet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "mbnet/serialize.hpp"

#include <array>
#include <bit>
#include <istream>
#include <ostream>

namespace mbnet {

namespace {

template <std::size_t N>
void put_le(std::ostream& out, std::uint64_t v) {
  std::array<char, N> buf{};
  for (std::size_t i = 0; i < N; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(buf.data(), N);
  if (!out) fail(ErrorKind::data, "write failed");
}

template <std::size_t N>
std::uint64_t get_le(std::istream& in) {
  std::array<unsigned char, N> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), N);
  if (in.gcount() != static_cast<std::streamsize>(N)) {
    fail(ErrorKind::data, "unexpected end of stream");
  }
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < N; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

// Guards against absurd allocations when reading corrupted input.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

}  // namespace

void write_u8(std::ostream& out, std::uint8_t v) { put_le<1>(out, v); }
void write_u32(std::ostream& out, std::uint32_t v) { put_le<4>(out, v); }
void write_u64(std::ostream& out, std::uint64_t v) { put_le<8>(out, v); }
void write_f64(std::ostream& out, double v) { put_le<8>(out, std::bit_cast<std::uint64_t>(v)); }

void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!out) fail(ErrorKind::data, "write failed");
}

std::uint8_t read_u8(std::istream& in) { return static_cast<std::uint8_t>(get_le<1>(in)); }
std::uint32_t read_u32(std::istream& in) { return static_cast<std::uint32_t>(get_le<4>(in)); }
std::uint64_t read_u64(std::istream& in) { return get_le<8>(in); }
double read_f64(std::istream& in) { return std::bit_cast<double>(get_le<8>(in)); }

std::string read_string(std::istream& in) {
  const auto n = read_u64(in);
  if (n > kMaxElements) fail(ErrorKind::data, "string length " + std::to_string(n) + " is implausible");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (in.gcount() != static_cast<std::streamsize>(n)) fail(ErrorKind::data, "truncated string");
  return s;
}

void write_tensor(std::ostream& out, const Tensor& t) {
  if (t.empty()) fail(ErrorKind::shape, "cannot serialize a placeholder tensor");
  if (t.rank() > 255) fail(ErrorKind::shape, "tensor rank exceeds 255");
  write_u8(out, static_cast<std::uint8_t>(t.rank()));
  for (auto d : t.shape()) write_u64(out, d);
  for (double v : t.data()) write_f64(out, v);
}

Tensor read_tensor(std::istream& in) {
  const auto rank = read_u8(in);
  if (rank == 0) fail(ErrorKind::data, "serialized tensor has rank 0");
  Shape shape(rank);
  std::uint64_t count = 1;
  for (auto& d : shape) {
    d = read_u64(in);
    if (d == 0) fail(ErrorKind::data, "serialized tensor has a zero dimension");
    count *= d;
    if (count > kMaxElements) fail(ErrorKind::data, "serialized tensor is implausibly large");
  }
  std::vector<double> data(count);
  for (auto& v : data) v = read_f64(in);
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace mbnet
