#include "ganvert/image_io.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "doctest.h"
#include "ganvert/rng.hpp"

using namespace ganvert;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("ganvert-io-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("byte values map onto the generator range") {
  TempDir dir;
  const std::string path = dir.file("px.ppm");
  std::string bytes = "P6\n2 1\n255\n";
  bytes.push_back('\x00');
  bytes.push_back('\x80');  // 128
  bytes.push_back('\xff');  // 255
  bytes.push_back('\x01');
  bytes.push_back('\x02');
  bytes.push_back('\x03');
  spit(path, bytes);

  Tensor img = read_ppm(path);
  REQUIRE(img.shape == std::vector<std::size_t>({3, 1, 2}));
  CHECK(img.at(0, 0, 0) == -1.0);
  CHECK(img.at(1, 0, 0) == 2.0 * 128.0 / 255.0 - 1.0);
  CHECK(img.at(2, 0, 0) == 1.0);
  CHECK(img.at(0, 0, 1) == 2.0 * 1.0 / 255.0 - 1.0);
}

TEST_CASE("write quantizes, clamps, and survives a read-write cycle byte for byte") {
  TempDir dir;
  Tensor img({3, 2, 2}, 0.0);
  img.at(0, 0, 0) = -1.0;   // byte 0
  img.at(1, 0, 0) = 1.0;    // byte 255
  img.at(2, 0, 0) = 0.0;    // round(127.5) = 128
  img.at(0, 0, 1) = -3.0;   // clamps to 0
  img.at(1, 0, 1) = 7.0;    // clamps to 255
  img.at(2, 0, 1) = std::nan("");  // clamps to 0
  const std::string first = dir.file("a.ppm");
  write_ppm(img, first);

  std::string bytes = slurp(first);
  const std::string header = "P6\n2 2\n255\n";
  REQUIRE(bytes.substr(0, header.size()) == header);
  const unsigned char* px = reinterpret_cast<const unsigned char*>(bytes.data() + header.size());
  CHECK(px[0] == 0);
  CHECK(px[1] == 255);
  CHECK(px[2] == 128);
  CHECK(px[3] == 0);
  CHECK(px[4] == 255);
  CHECK(px[5] == 0);

  // Quantization happens once: read it back, write again, bytes identical.
  const std::string second = dir.file("b.ppm");
  write_ppm(read_ppm(first), second);
  CHECK(slurp(second) == bytes);
}

TEST_CASE("random images survive write-read within one quantization step") {
  TempDir dir;
  SeededRng rng(61);
  Tensor img = rng.uniform_tensor({3, 5, 4}, -1.0, 1.0);
  const std::string path = dir.file("r.ppm");
  write_ppm(img, path);
  Tensor back = read_ppm(path);
  REQUIRE(back.shape == img.shape);
  CHECK(max_abs_diff(img, back) <= 1.0 / 255.0 + 1e-12);

  // And the quantized image is a fixed point of the cycle.
  const std::string again = dir.file("r2.ppm");
  write_ppm(back, again);
  CHECK(slurp(again) == slurp(path));
}

TEST_CASE("header comments and whitespace are tolerated") {
  TempDir dir;
  const std::string path = dir.file("c.ppm");
  std::string bytes = "P6\n# made by hand\n  1\t1 # trailing\n255\n";
  bytes.append(3, '\x40');
  spit(path, bytes);
  Tensor img = read_ppm(path);
  REQUIRE(img.shape == std::vector<std::size_t>({3, 1, 1}));
  CHECK(img.at(0, 0, 0) == 2.0 * 64.0 / 255.0 - 1.0);
}

TEST_CASE("malformed files are rejected with image errors") {
  TempDir dir;
  const std::string path = dir.file("bad.ppm");

  spit(path, "P5\n1 1\n255\n x");
  CHECK_THROWS_AS(read_ppm(path), image_error);

  spit(path, "P6\n2 2\n255\nxy");  // truncated pixel payload
  CHECK_THROWS_AS(read_ppm(path), image_error);

  spit(path, "P6\n0 1\n255\n");
  CHECK_THROWS_AS(read_ppm(path), image_error);

  spit(path, "P6\n1 1\n65535\n??????");
  CHECK_THROWS_AS(read_ppm(path), image_error);

  spit(path, "P6\n1");
  CHECK_THROWS_AS(read_ppm(path), image_error);

  CHECK_THROWS_AS(read_ppm(dir.file("missing.ppm")), image_error);

  CHECK_THROWS_AS(write_ppm(Tensor({2, 4, 4}, 0.0), path), image_error);
  CHECK_THROWS_AS(write_ppm(Tensor({16}, 0.0), path), image_error);
}
