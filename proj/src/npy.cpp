#include "pogmdm/npy.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <regex>
#include <sstream>
#include <stdexcept>

namespace pogmdm {

namespace {

static_assert(std::endian::native == std::endian::little, "NPY I/O assumes a little-endian host");

constexpr char kMagic[] = "\x93NUMPY";

std::string shape_tuple(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    os << shape[i];
    if (shape.size() == 1 || i + 1 < shape.size()) os << ',';
    if (i + 1 < shape.size()) os << ' ';
  }
  os << ')';
  return os.str();
}

void write_raw(const std::string& path, const char* descr, const std::vector<std::size_t>& shape, const void* data,
               std::size_t bytes) {
  std::string header = "{'descr': '" + std::string(descr) + "', 'fortran_order': False, 'shape': " +
                       shape_tuple(shape) + ", }";
  const std::size_t preamble = 10;
  const std::size_t total = ((preamble + header.size() + 1 + 63) / 64) * 64;
  header.append(total - preamble - header.size() - 1, ' ');
  header.push_back('\n');
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.write(kMagic, 6);
  const char version[2] = {1, 0};
  out.write(version, 2);
  const auto len = static_cast<std::uint16_t>(header.size());
  out.write(reinterpret_cast<const char*>(&len), 2);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

template <class T>
std::vector<T> flatten(const std::vector<Array2D<T>>& stack) {
  if (stack.empty()) throw std::invalid_argument("write_npy: empty stack");
  std::vector<T> flat;
  for (const auto& plane : stack) {
    require_same_shape(plane.shape(), stack.front().shape(), "write_npy");
    flat.insert(flat.end(), plane.begin(), plane.end());
  }
  return flat;
}

}  // namespace

NpyArray read_npy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  char magic[6];
  in.read(magic, 6);
  if (!in || std::memcmp(magic, kMagic, 6) != 0) throw std::runtime_error("'" + path + "' is not an NPY file");
  unsigned char version[2];
  in.read(reinterpret_cast<char*>(version), 2);
  std::size_t header_len = 0;
  if (version[0] == 1) {
    std::uint16_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 2);
    header_len = len;
  } else if (version[0] == 2 || version[0] == 3) {
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 4);
    header_len = len;
  } else {
    throw std::runtime_error("'" + path + "': unsupported NPY version");
  }
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw std::runtime_error("'" + path + "': truncated header");

  std::smatch m;
  if (!std::regex_search(header, m, std::regex(R"('descr'\s*:\s*'([^']*)')"))) {
    throw std::runtime_error("'" + path + "': missing descr");
  }
  const std::string descr = m[1];
  if (std::regex_search(header, std::regex(R"('fortran_order'\s*:\s*True)"))) {
    throw std::runtime_error("'" + path + "': Fortran-ordered arrays are not supported");
  }
  if (!std::regex_search(header, m, std::regex(R"('shape'\s*:\s*\(([^)]*)\))"))) {
    throw std::runtime_error("'" + path + "': missing shape");
  }
  NpyArray out;
  const std::string dims = m[1];
  const std::regex num(R"(\d+)");
  for (auto it = std::sregex_iterator(dims.begin(), dims.end(), num); it != std::sregex_iterator(); ++it) {
    out.shape.push_back(std::stoull(it->str()));
  }
  std::size_t count = 1;
  for (auto d : out.shape) count *= d;

  if (descr == "<f8") {
    out.real.resize(count);
    in.read(reinterpret_cast<char*>(out.real.data()), static_cast<std::streamsize>(count * sizeof(double)));
  } else if (descr == "<c16") {
    out.is_complex = true;
    out.cplx.resize(count);
    in.read(reinterpret_cast<char*>(out.cplx.data()), static_cast<std::streamsize>(count * sizeof(complex)));
  } else {
    throw std::runtime_error("'" + path + "': unsupported dtype " + descr + " (need <f8 or <c16)");
  }
  if (!in) throw std::runtime_error("'" + path + "': truncated data");
  return out;
}

void write_npy(const std::string& path, const Image& image) {
  write_raw(path, "<f8", {image.rows(), image.cols()}, image.data(), image.size() * sizeof(double));
}

void write_npy(const std::string& path, const ComplexImage& image) {
  write_raw(path, "<c16", {image.rows(), image.cols()}, image.data(), image.size() * sizeof(complex));
}

void write_npy(const std::string& path, const std::vector<Image>& stack) {
  const auto flat = flatten(stack);
  write_raw(path, "<f8", {stack.size(), stack.front().rows(), stack.front().cols()}, flat.data(),
            flat.size() * sizeof(double));
}

void write_npy(const std::string& path, const std::vector<ComplexImage>& stack) {
  const auto flat = flatten(stack);
  write_raw(path, "<c16", {stack.size(), stack.front().rows(), stack.front().cols()}, flat.data(),
            flat.size() * sizeof(complex));
}

Image read_image(const std::string& path) {
  NpyArray a = read_npy(path);
  if (a.shape.size() != 2) throw std::runtime_error("'" + path + "': expected a 2-D array");
  if (a.is_complex) throw std::runtime_error("'" + path + "': expected a real array");
  return Image(Shape{a.shape[0], a.shape[1]}, std::move(a.real));
}

ComplexImage read_complex_image(const std::string& path) {
  auto stack = read_complex_stack(path);
  if (stack.size() != 1) throw std::runtime_error("'" + path + "': expected a single 2-D array");
  return std::move(stack.front());
}

std::vector<ComplexImage> read_complex_stack(const std::string& path) {
  NpyArray a = read_npy(path);
  std::size_t planes = 1;
  Shape shape;
  if (a.shape.size() == 2) {
    shape = {a.shape[0], a.shape[1]};
  } else if (a.shape.size() == 3) {
    planes = a.shape[0];
    shape = {a.shape[1], a.shape[2]};
  } else {
    throw std::runtime_error("'" + path + "': expected a 2-D or 3-D array");
  }
  std::vector<ComplexImage> out;
  for (std::size_t c = 0; c < planes; ++c) {
    ComplexImage z(shape);
    for (std::size_t p = 0; p < z.size(); ++p) {
      const std::size_t q = c * shape.size() + p;
      z[p] = a.is_complex ? a.cplx[q] : complex{a.real[q], 0.0};
    }
    out.push_back(std::move(z));
  }
  return out;
}

}  // namespace pogmdm
