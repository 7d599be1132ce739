#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "pouring/rng.hpp"
#include "pouring/wav.hpp"

using namespace pouring;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("pouring_wav_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("wav round trip preserves samples to 16-bit precision", "[wav]") {
  TempDir dir;
  Rng rng(5);
  std::vector<float> samples(4411);
  for (auto& s : samples) s = static_cast<float>(0.8 * rng.normal());

  const std::string path = dir.file("a.wav");
  write_wav(path, samples, 44100);
  const WavData back = read_wav(path);

  REQUIRE(back.sample_rate == 44100);
  REQUIRE(back.samples.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const float clamped = std::clamp(samples[i], -1.0f, 1.0f);
    REQUIRE(back.samples[i] == Catch::Approx(clamped).margin(1.0 / 32767.0));
  }

  // Values already on the quantization grid survive exactly.
  write_wav(path, back.samples, 44100);
  const WavData twice = read_wav(path);
  REQUIRE(twice.samples == back.samples);
}

TEST_CASE("wav header bytes are canonical", "[wav]") {
  TempDir dir;
  const std::string path = dir.file("h.wav");
  std::vector<float> samples(10, 0.0f);
  write_wav(path, samples, 16000);

  std::ifstream in(path, std::ios::binary);
  char head[12];
  in.read(head, 12);
  REQUIRE(std::string(head, 4) == "RIFF");
  REQUIRE(std::string(head + 8, 4) == "WAVE");
  REQUIRE(std::filesystem::file_size(path) == 44 + samples.size() * 2);
}

TEST_CASE("writing twice with identical input is byte-identical", "[wav]") {
  TempDir dir;
  Rng rng(17);
  std::vector<float> samples(2000);
  for (auto& s : samples) s = static_cast<float>(rng.normal() * 0.4);
  write_wav(dir.file("x.wav"), samples, 44100);
  write_wav(dir.file("y.wav"), samples, 44100);

  std::ifstream a(dir.file("x.wav"), std::ios::binary);
  std::ifstream b(dir.file("y.wav"), std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  const std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  REQUIRE(sa == sb);
}

TEST_CASE("reader rejects broken files", "[wav]") {
  TempDir dir;
  REQUIRE_THROWS(read_wav(dir.file("missing.wav")));

  const std::string junk = dir.file("junk.wav");
  std::ofstream(junk) << "this is not audio";
  REQUIRE_THROWS(read_wav(junk));
}
