#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "llvd/config_file.hpp"
#include "test_support.hpp"

using namespace llvd;

TEST_CASE("key=value parsing with comments, blanks, and overrides") {
  const KeyValues kv = KeyValues::parse(
      "# full-line comment\n"
      "\n"
      "a = 1\n"
      "  b =  two words  # trailing comment\n"
      "a = 3\n");
  CHECK(kv.entries().size() == 2);
  CHECK(kv.get_int("a", 0) == 3);  // later assignment wins
  CHECK(kv.get_str("b", "") == "two words");
}

TEST_CASE("malformed lines name their line number") {
  try {
    KeyValues::parse("ok = 1\nnot a pair\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(KeyValues::parse("= nokey\n"), ConfigError);
}

TEST_CASE("typed getters fall back when absent and reject bad values") {
  const KeyValues kv = KeyValues::parse(
      "i = 42\nd = 2.5\nb = true\nlist = 1, 2,3\ndlist = 0.5, 1.5\nbad = xyz\n");
  CHECK(kv.get_int("i", 0) == 42);
  CHECK(kv.get_int("missing", 7) == 7);
  CHECK(kv.get_double("d", 0) == 2.5);
  CHECK(kv.get_bool("b", false));
  CHECK_FALSE(kv.get_bool("missing", false));
  CHECK(kv.get_int_list("list", {}) == std::vector<int64_t>{1, 2, 3});
  CHECK(kv.get_double_list("dlist", {}) == std::vector<double>{0.5, 1.5});

  try {
    kv.get_int("bad", 0);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("bad") != std::string::npos);  // names the key
  }
  CHECK_THROWS_AS(kv.get_bool("bad", false), ConfigError);
  CHECK_THROWS_AS(kv.get_double("bad", 0), ConfigError);
}

TEST_CASE("serialized text parses back to the same entries") {
  KeyValues kv;
  kv.set("z.key", "26");
  kv.set("a.key", "hello");
  const std::string text = kv.to_text();
  CHECK(text.find("a.key") < text.find("z.key"));  // sorted
  const KeyValues back = KeyValues::parse(text);
  CHECK(back.entries() == kv.entries());
}

TEST_CASE("config files load from disk") {
  namespace fs = std::filesystem;
  const fs::path p = fs::temp_directory_path() / "llvd_cfg_test.cfg";
  std::ofstream(p) << "model.kernel = 5\n";
  CHECK(KeyValues::load(p.string()).get_int("model.kernel", 0) == 5);
  fs::remove(p);
  CHECK_THROWS_AS(KeyValues::load(p.string()), IoError);
}

TEST_CASE("model configuration round trips through key-value form") {
  ModelConfig cfg = test::tiny_config();
  const KeyValues kv = model_config_to_kv(cfg);
  const ModelConfig back = model_config_from(kv);
  CHECK(back.stage_widths == cfg.stage_widths);
  CHECK(back.lstm_hidden == cfg.lstm_hidden);
  CHECK(back.lstm_layers == cfg.lstm_layers);
  CHECK(back.kernel == cfg.kernel);
  CHECK(back.in_channels == cfg.in_channels);
  CHECK(back.shuffle == cfg.shuffle);
  CHECK(back.conv_per_stage == cfg.conv_per_stage);
}

TEST_CASE("an explicitly empty stage list selects the recurrence-only variant") {
  const KeyValues kv = KeyValues::parse(
      "model.stage_widths =\nmodel.lstm_hidden = 4\nmodel.lstm_layers = 2\n");
  const ModelConfig cfg = model_config_from(kv);
  CHECK(cfg.stage_widths.empty());
  CHECK(cfg.lstm_hidden == 4);
}

TEST_CASE("absent model keys keep the defaults") {
  const ModelConfig cfg = model_config_from(KeyValues::parse(""));
  CHECK(cfg.stage_widths == std::vector<int64_t>{20, 40, 80});
  CHECK(cfg.lstm_hidden == 80);
  CHECK(cfg.conv_per_stage == 5);
}

TEST_CASE("model configuration parsing validates the result") {
  CHECK_THROWS_AS(model_config_from(KeyValues::parse("model.kernel = 4\n")), ConfigError);
  CHECK_THROWS_AS(model_config_from(KeyValues::parse("model.lstm_hidden = 7\n")), ConfigError);
}
