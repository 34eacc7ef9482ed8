#include <doctest.h>

#include <unistd.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "evsynth/checkpoint.hpp"
#include "evsynth/evt1.hpp"
#include "evsynth/manifest.hpp"
#include "evsynth/pnm.hpp"
#include "evsynth/rng.hpp"

using namespace evsynth;
namespace fs = std::filesystem;

namespace {

std::vector<Event> random_sorted_events(Rng& rng, int count, uint16_t w,
                                        uint16_t h) {
  std::vector<Event> events(count);
  uint64_t t = 0;
  for (Event& e : events) {
    t += rng.uniform_int(1000);
    e.t = t;
    e.x = static_cast<uint16_t>(rng.uniform_int(w));
    e.y = static_cast<uint16_t>(rng.uniform_int(h));
    e.p = rng.uniform_int(2) ? int8_t{1} : int8_t{-1};
  }
  return events;
}

uint64_t read_le(const std::string& bytes, size_t offset, int n) {
  uint64_t v = 0;
  for (int i = 0; i < n; ++i)
    v |= static_cast<uint64_t>(static_cast<unsigned char>(bytes[offset + i]))
         << (8 * i);
  return v;
}

fs::path temp_dir(const char* tag) {
  fs::path dir = fs::temp_directory_path() /
                 (std::string("evsynth_io_") + tag + "_" +
                  std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_SUITE("event_io") {

TEST_CASE("evt1: header is exactly 16 bytes in documented order") {
  std::ostringstream out;
  size_t n = encode_events(out, {}, 640, 480);
  std::string bytes = out.str();
  REQUIRE(n == kEvt1HeaderBytes);
  REQUIRE(bytes.size() == 16);
  CHECK(bytes.substr(0, 4) == "EVT1");
  CHECK(read_le(bytes, 4, 2) == 640);
  CHECK(read_le(bytes, 6, 2) == 480);
  CHECK(read_le(bytes, 8, 8) == 0);
}

TEST_CASE("evt1: records are 13 bytes: t, x, y, polarity byte") {
  std::vector<Event> events = {{258, 772, 0x0102030405060708ULL, 1},
                               {259, 773, 0x0102030405060709ULL, -1}};
  std::ostringstream out;
  size_t n = encode_events(out, events, 1024, 1024);
  std::string bytes = out.str();
  REQUIRE(n == 16 + 2 * kEvt1RecordBytes);
  CHECK(read_le(bytes, 16, 8) == 0x0102030405060708ULL);
  CHECK(read_le(bytes, 24, 2) == 258);
  CHECK(read_le(bytes, 26, 2) == 772);
  CHECK(static_cast<unsigned char>(bytes[28]) == 0x01);
  CHECK(static_cast<unsigned char>(bytes[29 + 12]) == 0xFF);  // -1 encodes FF
}

TEST_CASE("evt1: decode(encode(s)) == s on 100 random streams") {
  Rng rng(201);
  for (int trial = 0; trial < 100; ++trial) {
    uint16_t w = static_cast<uint16_t>(1 + rng.uniform_int(300));
    uint16_t h = static_cast<uint16_t>(1 + rng.uniform_int(300));
    auto events =
        random_sorted_events(rng, static_cast<int>(rng.uniform_int(200)), w, h);
    std::ostringstream out;
    encode_events(out, events, w, h);
    std::istringstream in(out.str());
    Evt1Header header;
    std::vector<Event> back = decode_events(in, &header);
    REQUIRE(header.width == w);
    REQUIRE(header.height == h);
    REQUIRE(header.event_count == events.size());
    REQUIRE(back == events);
  }
}

TEST_CASE("evt1: encode(decode(bytes)) reproduces the bytes") {
  Rng rng(202);
  auto events = random_sorted_events(rng, 57, 32, 24);
  std::ostringstream out;
  encode_events(out, events, 32, 24);
  std::string bytes = out.str();

  std::istringstream in(bytes);
  Evt1Header header;
  std::vector<Event> decoded = decode_events(in, &header);
  std::ostringstream out2;
  encode_events(out2, decoded, header.width, header.height);
  CHECK(out2.str() == bytes);
}

TEST_CASE("evt1: decoder yields events one at a time with a byte cursor") {
  Rng rng(203);
  auto events = random_sorted_events(rng, 5, 8, 8);
  std::ostringstream out;
  encode_events(out, events, 8, 8);
  std::istringstream in(out.str());
  Evt1Decoder dec(in);
  CHECK(dec.width() == 8);
  for (const Event& e : events) {
    auto got = dec.next();
    REQUIRE(got.has_value());
    CHECK(*got == e);
  }
  CHECK(!dec.next().has_value());
}

TEST_CASE("evt1: malformed input is rejected with typed errors") {
  Rng rng(204);
  auto events = random_sorted_events(rng, 9, 16, 16);
  std::ostringstream out;
  encode_events(out, events, 16, 16);
  std::string bytes = out.str();

  SUBCASE("truncated record") {
    std::istringstream in(bytes.substr(0, bytes.size() - 1));
    CHECK_THROWS_AS(decode_events(in), FormatError);
  }
  SUBCASE("truncated header") {
    std::istringstream in(bytes.substr(0, 10));
    CHECK_THROWS_AS(decode_events(in), FormatError);
  }
  SUBCASE("bad magic") {
    bytes[0] = 'X';
    std::istringstream in(bytes);
    CHECK_THROWS_AS(decode_events(in), FormatError);
  }
  SUBCASE("bad polarity byte") {
    bytes[16 + 12] = 0x02;
    std::istringstream in(bytes);
    CHECK_THROWS_AS(decode_events(in), FormatError);
  }
  SUBCASE("out-of-bounds coordinate") {
    // x lives at record offset 8; 16 bits little-endian
    bytes[16 + 8] = static_cast<char>(0xFF);
    bytes[16 + 9] = static_cast<char>(0xFF);
    std::istringstream in(bytes);
    CHECK_THROWS_AS(decode_events(in), DataError);
  }
}

TEST_CASE("evt1: encode rejects unsorted or out-of-bounds streams") {
  std::ostringstream out;
  std::vector<Event> bad_order = {{0, 0, 10, 1}, {0, 0, 5, 1}};
  CHECK_THROWS_AS(encode_events(out, bad_order, 4, 4), DataError);
  std::vector<Event> oob = {{4, 0, 10, 1}};
  CHECK_THROWS_AS(encode_events(out, oob, 4, 4), DataError);
  std::vector<Event> bad_p = {{0, 0, 10, 0}};
  CHECK_THROWS_AS(encode_events(out, bad_p, 4, 4), DataError);
}

TEST_CASE("evt1: file round trip through the atomic writer") {
  fs::path dir = temp_dir("evt1");
  Rng rng(205);
  auto events = random_sorted_events(rng, 123, 64, 64);
  std::string path = (dir / "events.evt1").string();
  write_events_file(path, events, 64, 64);
  Evt1Header header;
  std::vector<Event> back = read_events_file(path, &header);
  CHECK(back == events);
  CHECK(header.width == 64);
  CHECK(!fs::exists(path + ".tmp"));
  fs::remove_all(dir);
}

TEST_CASE("pnm: canonical write/read round trip is byte identical") {
  Rng rng(206);
  for (int channels : {1, 3}) {
    IntensityFrame f(channels, 17, 9);
    for (float& v : f.values)
      v = static_cast<float>(rng.uniform_int(256)) / 255.0f;
    std::ostringstream out;
    write_pnm(out, f);
    std::string bytes = out.str();
    CHECK(bytes.substr(0, 2) == (channels == 3 ? "P6" : "P5"));

    std::istringstream in(bytes);
    IntensityFrame back = read_pnm(in);
    REQUIRE(back.channels == f.channels);
    REQUIRE(back.width == f.width);
    REQUIRE(back.height == f.height);
    REQUIRE(back.values == f.values);

    std::ostringstream out2;
    write_pnm(out2, back);
    CHECK(out2.str() == bytes);
  }
}

TEST_CASE("pnm: reader accepts comments and flexible whitespace") {
  std::string text = "P5 # gray\n# a comment line\n 2\t2 #dims\n255\n";
  text += std::string("\x00\x40\x80\xFF", 4);
  std::istringstream in(text);
  IntensityFrame f = read_pnm(in);
  REQUIRE(f.channels == 1);
  REQUIRE(f.width == 2);
  REQUIRE(f.height == 2);
  CHECK(f.values[0] == 0.0f);
  CHECK(f.values[3] == 1.0f);
}

TEST_CASE("pnm: malformed files are rejected") {
  auto reject = [](const std::string& text) {
    std::istringstream in(text);
    CHECK_THROWS_AS(read_pnm(in), FormatError);
  };
  reject("P4\n2 2\n255\n....");    // wrong magic
  reject("P5\n2 2\n65535\n....");  // unsupported maxval
  reject(std::string("P5\n2 2\n255\nab", 13));  // 2 of 4 pixel bytes
}

TEST_CASE("manifest: parse extracts frames, events and period") {
  SequenceManifest m = parse_manifest(
      "# toy sequence\n"
      "frame=frame_000.ppm\n"
      "frame=frame_001.ppm\n"
      "events=events.evt1\n"
      "period_ns=10000000\n");
  REQUIRE(m.frames.size() == 2);
  CHECK(m.frames[1] == "frame_001.ppm");
  CHECK(m.events == "events.evt1");
  CHECK(m.period_ns == 10000000);
}

TEST_CASE("manifest: malformed text is rejected") {
  CHECK_THROWS_AS(parse_manifest("frame=a.ppm\nevents=e.evt1\n"), FormatError);
  CHECK_THROWS_AS(parse_manifest("what=is this\n"), FormatError);
}

TEST_CASE("evck: header magic and version") {
  Checkpoint c;
  c.put("w", Tensor::full(Shape{2, 2}, 0.5f));
  std::ostringstream out;
  c.save(out);
  std::string bytes = out.str();
  REQUIRE(bytes.size() > 6);
  CHECK(bytes.substr(0, 4) == "EVCK");
  CHECK(read_le(bytes, 4, 2) == 1);
}

TEST_CASE("evck: load(save(c)) is bit exact on 100 random checkpoints") {
  Rng rng(207);
  for (int trial = 0; trial < 100; ++trial) {
    Checkpoint c;
    int tensors = 1 + static_cast<int>(rng.uniform_int(6));
    for (int i = 0; i < tensors; ++i) {
      std::vector<int> dims;
      int rank = 1 + static_cast<int>(rng.uniform_int(4));
      for (int d = 0; d < rank; ++d)
        dims.push_back(1 + static_cast<int>(rng.uniform_int(5)));
      c.put("t" + std::to_string(i),
            Tensor::randn(Shape{std::vector<int>(dims)}, rng, 3.0));
    }
    std::ostringstream out;
    c.save(out);
    std::istringstream in(out.str());
    Checkpoint back = Checkpoint::load(in);

    REQUIRE(back.entries().size() == c.entries().size());
    for (const auto& [name, tensor] : c.entries()) {
      REQUIRE(back.has(name));
      const Tensor& b = back.get(name);
      REQUIRE(b.shape() == tensor.shape());
      REQUIRE(std::memcmp(b.data().data(), tensor.data().data(),
                          tensor.data().size() * sizeof(float)) == 0);
    }

    // Identical content serializes to identical bytes (canonical order).
    std::ostringstream out2;
    back.save(out2);
    REQUIRE(out2.str() == out.str());
  }
}

TEST_CASE("evck: scalars round trip at double precision") {
  Checkpoint c;
  c.put_scalar("steps", 12345.0);
  c.put_scalar("pi-ish", 3.14159f);  // stored as f32
  std::ostringstream out;
  c.save(out);
  std::istringstream in(out.str());
  Checkpoint back = Checkpoint::load(in);
  CHECK(back.get_scalar("steps") == 12345.0);
  CHECK(back.get_scalar("pi-ish") == doctest::Approx(3.14159).epsilon(1e-6));
}

TEST_CASE("evck: malformed input is rejected") {
  Checkpoint c;
  c.put("w", Tensor::full(Shape{3}, 1.0f));
  std::ostringstream out;
  c.save(out);
  std::string bytes = out.str();

  SUBCASE("bad magic") {
    bytes[0] = 'X';
    std::istringstream in(bytes);
    CHECK_THROWS_AS(Checkpoint::load(in), FormatError);
  }
  SUBCASE("truncated payload") {
    std::istringstream in(bytes.substr(0, bytes.size() - 2));
    CHECK_THROWS_AS(Checkpoint::load(in), FormatError);
  }
}

TEST_CASE("evck: names_under strips the prefix") {
  Checkpoint c;
  c.put("gen/enc0/w", Tensor::full(Shape{1}, 1.0f));
  c.put("gen/enc0/b", Tensor::full(Shape{1}, 2.0f));
  c.put("disc/w", Tensor::full(Shape{1}, 3.0f));
  auto names = c.names_under("gen");
  REQUIRE(names.size() == 2);
  CHECK(names[0] == "enc0/b");
  CHECK(names[1] == "enc0/w");
  CHECK(c.names_under("rec").empty());
}

TEST_CASE("evck: restore_params names the offending tensor") {
  Checkpoint c;
  c.put("gen/a", Tensor::full(Shape{2}, 1.0f));
  Tensor target = Tensor::zeros(Shape{2});

  // Checkpoint entry with no matching parameter: named in the error.
  CHECK_THROWS_WITH_AS(restore_params(c, "gen", {{"missing", target}}),
                       doctest::Contains("gen/a"), ConfigError);

  // Parameter with no matching checkpoint entry: also named.
  Tensor extra = Tensor::zeros(Shape{2});
  CHECK_THROWS_WITH_AS(
      restore_params(c, "gen", {{"a", target}, {"missing", extra}}),
      doctest::Contains("missing"), ConfigError);

  // Shape mismatch also names the tensor.
  Tensor wrong = Tensor::zeros(Shape{3});
  CHECK_THROWS_WITH_AS(restore_params(c, "gen", {{"a", wrong}}),
                       doctest::Contains("gen/a"), ConfigError);

  // The happy path copies values.
  restore_params(c, "gen", {{"a", target}});
  CHECK(target.data()[0] == 1.0f);
}

TEST_CASE("evck: file round trip is atomic and bit exact") {
  fs::path dir = temp_dir("evck");
  Rng rng(208);
  Checkpoint c;
  c.put("gen/w", Tensor::randn(Shape{4, 3, 2}, rng));
  c.put_scalar("meta/step", 77.0);
  std::string path = (dir / "model.evck").string();
  c.save_file(path);
  CHECK(!fs::exists(path + ".tmp"));

  Checkpoint back = Checkpoint::load_file(path);
  CHECK(back.get_scalar("meta/step") == 77.0);
  const Tensor& w = back.get("gen/w");
  REQUIRE(std::memcmp(w.data().data(), c.get("gen/w").data().data(),
                      w.data().size() * sizeof(float)) == 0);
  fs::remove_all(dir);
}

}  // TEST_SUITE
