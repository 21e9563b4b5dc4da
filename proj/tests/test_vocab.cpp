#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "diffstr/rng.hpp"
#include "diffstr/vocab.hpp"

using namespace diffstr;

TEST_CASE("default charset maps id = codepoint - 33") {
  Charset cs = Charset::printable94();
  CHECK(cs.size() == 94);
  CHECK(cs.id_of('!') == 0);
  CHECK(cs.id_of('H') == 'H' - 33);
  CHECK(cs.id_of('~') == 93);
  CHECK(cs.char_at(39) == 'H');
  CHECK_FALSE(cs.contains(' '));
}

TEST_CASE("special token ids sit after the charset block") {
  Vocabulary v(Charset::printable94());
  CHECK(v.eos() == 94);
  CHECK(v.pad() == 95);
  CHECK(v.mask() == 96);
  CHECK(v.size() == 97);
  CHECK(v.eos() < v.pad());
  CHECK(v.pad() < v.mask());
}

TEST_CASE("encode_label lays out chars, EOS, then PAD") {
  Vocabulary v(Charset::printable94());

  SUBCASE("empty label") {
    TokenSeq s = encode_label("", v, 4);
    CHECK(s == TokenSeq{v.eos(), v.pad(), v.pad(), v.pad()});
  }
  SUBCASE("Hi!") {
    TokenSeq s = encode_label("Hi!", v, 26);
    TokenSeq expect = {39, 72, 0, v.eos()};
    expect.resize(26, v.pad());
    CHECK(s == expect);
  }
  SUBCASE("label of length L does not fit") {
    CHECK_THROWS_AS(encode_label(std::string(26, 'x'), v, 26), LabelTooLong);
  }
  SUBCASE("unknown character") {
    CHECK_THROWS_AS(encode_label("a b", v, 8), UnknownCharacter);
  }
}

TEST_CASE("decode_tokens truncates at the first non-character") {
  Vocabulary v(Charset::printable94());
  TokenSeq s = encode_label("Hi!", v, 26);
  CHECK(decode_tokens(s, v) == "Hi!");

  TokenSeq empty(26, v.pad());
  empty[0] = v.eos();
  CHECK(decode_tokens(empty, v) == "");

  TokenSeq masked = s;
  masked[1] = v.mask();
  CHECK(decode_tokens(masked, v) == "H");
}

TEST_CASE("presence targets flag character positions") {
  Vocabulary v(Charset::printable94());
  auto p = presence_targets(encode_label("Hi!", v, 26), v);
  std::vector<std::uint8_t> expect(26, 0);
  expect[0] = expect[1] = expect[2] = 1;
  CHECK(p == expect);

  CHECK(presence_targets(encode_label("", v, 4), v) ==
        std::vector<std::uint8_t>(4, 0));

  auto full = presence_targets(encode_label(std::string(25, 'a'), v, 26), v);
  std::vector<std::uint8_t> expect_full(26, 1);
  expect_full[25] = 0;
  CHECK(full == expect_full);

  TokenSeq bad(4, v.pad());
  bad[0] = v.mask();
  CHECK_THROWS_AS(presence_targets(bad, v), NotClean);
}

TEST_CASE("round trip and presence/decode consistency over random labels") {
  Vocabulary v(Charset::printable94());
  Rng rng(123);
  const int L = 26;
  for (int it = 0; it < 500; ++it) {
    const int n = static_cast<int>(rng.below(L));  // 0..25
    std::string label;
    for (int i = 0; i < n; ++i)
      label.push_back(v.charset.char_at(static_cast<int>(rng.below(94))));
    TokenSeq s = encode_label(label, v, L);
    CHECK(decode_tokens(s, v) == label);
    CHECK(is_clean(s, v));

    const auto pres = presence_targets(s, v);
    int sum = 0;
    for (auto b : pres) sum += b;
    CHECK(sum == static_cast<int>(label.size()));

    // exactly one EOS, no PAD before it
    int eos_count = 0;
    bool seen_eos = false;
    for (int id : s) {
      if (id == v.eos()) {
        ++eos_count;
        seen_eos = true;
      }
      if (id == v.pad()) CHECK(seen_eos);
    }
    CHECK(eos_count == 1);
  }
}

TEST_CASE("charset file loading") {
  const std::string path = "test_charset_tmp.txt";
  {
    std::ofstream out(path);
    out << "# comment line\na\nb\nc\n";
  }
  Charset cs = Charset::from_file(path);
  CHECK(cs.size() == 3);
  CHECK(cs.id_of('a') == 0);
  CHECK(cs.id_of('c') == 2);
  std::remove(path.c_str());
  CHECK_THROWS_AS(Charset::from_file("no_such_charset_file.txt"), IoError);
  CHECK_THROWS_AS(Charset("aa"), ConfigError);
}
