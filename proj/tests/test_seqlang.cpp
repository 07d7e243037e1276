#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <random>
#include <string>

#include "spinterface/seqlang.hpp"

using namespace spinterface::seqlang;

namespace {

ValidationContext paper_vctx() {
  ValidationContext vc;
  vc.transition_freqs_ghz = {3.35007510128, 3.90992489872};
  vc.rabi_frequency_hz = 12.5e6;
  return vc;
}

const char* kFig2e =
    "laser 300us\n"
    "sweep tau 0ms..2ms n=41 {\n"
    "  wait tau\n"
    "}\n"
    "laser 20us\n"
    "measure 20us\n";

}  // namespace

TEST_CASE("tokenize: statement with a unit-suffixed quantity") {
  const auto tokens = tokenize("laser 2ms");
  REQUIRE(tokens.size() == 3);
  CHECK(tokens[0].kind == Token::Kind::ident);
  CHECK(tokens[0].text == "laser");
  CHECK(tokens[1].kind == Token::Kind::quantity);
  CHECK(tokens[1].quantity.magnitude == 2.0);
  CHECK(tokens[1].quantity.unit == Unit::ms);
  CHECK(tokens[2].kind == Token::Kind::eof);
}

TEST_CASE("tokenize: comments carry no content tokens") {
  for (const auto& tok : tokenize("# comment about the 2ms pulse\n")) {
    CHECK(tok.kind != Token::Kind::ident);
    CHECK(tok.kind != Token::Kind::quantity);
  }
}

TEST_CASE("tokenize: option syntax splits into ident, '=', quantity") {
  const auto tokens = tokenize("mw 40ns f=3.35GHz");
  REQUIRE(tokens.size() == 6);
  CHECK(tokens[0].text == "mw");
  CHECK(tokens[1].quantity == Quantity{40.0, Unit::ns});
  CHECK(tokens[2].text == "f");
  CHECK(tokens[3].kind == Token::Kind::equals);
  CHECK(tokens[4].quantity.magnitude == 3.35);
  CHECK(tokens[4].quantity.unit == Unit::ghz);
}

TEST_CASE("tokenize: range separator does not swallow the number") {
  const auto tokens = tokenize("0ms..2ms");
  REQUIRE(tokens.size() == 4);
  CHECK(tokens[0].quantity == Quantity{0.0, Unit::ms});
  CHECK(tokens[1].kind == Token::Kind::dotdot);
  CHECK(tokens[2].quantity == Quantity{2.0, Unit::ms});
}

TEST_CASE("tokenize: pi/2 is a single identifier") {
  const auto tokens = tokenize("mw pi/2");
  REQUIRE(tokens.size() == 3);
  CHECK(tokens[1].kind == Token::Kind::ident);
  CHECK(tokens[1].text == "pi/2");
}

TEST_CASE("tokenize: lexical errors carry line and column") {
  try {
    tokenize("laser 2ms\nwait @", "demo.seq");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.pos.line == 2);
    CHECK(e.pos.col == 6);
    CHECK(std::string(e.what()).find("demo.seq:2:6") != std::string::npos);
  }
  CHECK_THROWS_AS(tokenize("wait 1.2.3ms"), ParseError);
  CHECK_THROWS_AS(tokenize("wait 5parsec"), ParseError);
  CHECK_THROWS_AS(tokenize("wait -5ns"), ParseError);   // negative time
  CHECK_THROWS_AS(tokenize("wait 1e400ns"), ParseError);  // overflow
}

TEST_CASE("tokenize: negative dimensionless numbers are allowed") {
  const auto tokens = tokenize("mw 40ns phase=-1.5");
  CHECK(tokens[4].quantity.magnitude == -1.5);
  CHECK(tokens[4].quantity.unit == Unit::dimensionless);
}

TEST_CASE("quantity: canonical form picks the largest unit with magnitude >= 1") {
  CHECK(Quantity{1e-5, Unit::s}.canonical() == Quantity{10.0, Unit::us});
  CHECK((Quantity{1e-5, Unit::s}.canonical().unit == Unit::us));
  CHECK(Quantity{2500.0, Unit::mhz}.canonical() == Quantity{2.5, Unit::ghz});
  CHECK((Quantity{0.5, Unit::ns}.canonical() == Quantity{0.5, Unit::ns}));
  CHECK((Quantity{0.0, Unit::ms}.canonical().unit == Unit::s));
  CHECK(Quantity{40.0, Unit::ns}.si() == doctest::Approx(4e-8).epsilon(1e-15));
}

TEST_CASE("parse: reference program structure") {
  const auto seq = parse_text(kFig2e);
  REQUIRE(seq.statements.size() == 4);
  CHECK(std::holds_alternative<LaserStmt>(seq.statements[0]));
  REQUIRE(std::holds_alternative<SweepStmt>(seq.statements[1]));
  CHECK(std::holds_alternative<LaserStmt>(seq.statements[2]));
  CHECK(std::holds_alternative<MeasureStmt>(seq.statements[3]));
  const auto& sweep = std::get<SweepStmt>(seq.statements[1]);
  CHECK(sweep.variable == "tau");
  CHECK(sweep.steps == 41);
  REQUIRE(sweep.body.size() == 1);
  const auto& wait = std::get<WaitStmt>(sweep.body[0]);
  CHECK(wait.duration.is_variable());
  CHECK(wait.duration.variable == "tau");
}

TEST_CASE("parse: wait statement stores the written quantity") {
  const auto seq = parse_text("wait 10us\n");
  REQUIRE(seq.statements.size() == 1);
  const auto& wait = std::get<WaitStmt>(seq.statements[0]);
  CHECK(wait.duration.value->si() == doctest::Approx(1e-5).epsilon(1e-15));
}

TEST_CASE("parse: unit discipline rejects a frequency in a duration slot") {
  CHECK_THROWS_AS(parse_text("laser 2GHz"), ParseError);
  CHECK_THROWS_AS(parse_text("mw 40ns f=10us"), ParseError);
  CHECK_THROWS_AS(parse_text("measure 3mT"), ParseError);
}

TEST_CASE("parse: mw angle and option forms") {
  const auto seq = parse_text("mw pi\nmw pi/2\nmw 40ns f=3.35GHz a=0.5 phase=1.5\n");
  REQUIRE(seq.statements.size() == 3);
  CHECK(std::get<MwStmt>(seq.statements[0]).angle == MwAngle::pi);
  CHECK(std::get<MwStmt>(seq.statements[1]).angle == MwAngle::half_pi);
  const auto& mw = std::get<MwStmt>(seq.statements[2]);
  CHECK(mw.angle == MwAngle::none);
  CHECK(mw.duration.value->si() == doctest::Approx(4e-8));
  REQUIRE(mw.frequency.has_value());
  CHECK(mw.frequency->value->si() == doctest::Approx(3.35e9));
  CHECK(mw.amplitude.value->magnitude == 0.5);
  CHECK(mw.phase.value->magnitude == 1.5);
}

TEST_CASE("parse: unknown statements and options report expected sets") {
  try {
    parse_text("foo 1ms");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.expected.size() == 5);
    CHECK(e.pos.line == 1);
    CHECK(e.pos.col == 1);
  }
  try {
    parse_text("laser 1ms foo=2");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    REQUIRE(!e.expected.empty());
    CHECK(e.expected[0] == "power=");
  }
}

TEST_CASE("parse: sweep grammar errors carry positions and expected sets") {
  try {
    parse_text("sweep tau 0ms..2ms n 41 {\n wait tau\n}\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    REQUIRE(!e.expected.empty());
    CHECK(e.expected[0] == "=");
  }
  try {
    parse_text("sweep tau 0ms 2ms n=41 {\n wait tau\n}\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    REQUIRE(!e.expected.empty());
    CHECK(e.expected[0] == "..");
  }
  try {
    parse_text("sweep tau 0ms..2ms n=41 {\n wait tau\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    REQUIRE(!e.expected.empty());
    CHECK(e.expected[0] == "}");
  }
  CHECK_THROWS_AS(parse_text("sweep tau 0ms..2GHz n=41 {\n wait tau\n}\n"), ParseError);
  CHECK_THROWS_AS(parse_text("sweep tau 0ms..2ms n=4.5 {\n wait tau\n}\n"), ParseError);
  CHECK_THROWS_AS(parse_text("}"), ParseError);
}

TEST_CASE("validate: angle-form pulses resolve through the Rabi calibration") {
  const auto seq = parse_text("mw pi f=3.35GHz\nmw pi/2\n");
  const auto validated = validate(seq, paper_vctx());
  CHECK(validated.validated);
  const auto& pi_stmt = std::get<MwStmt>(validated.statements[0]);
  CHECK(pi_stmt.angle == MwAngle::pi);
  REQUIRE(!pi_stmt.duration.is_variable());
  CHECK(*pi_stmt.duration.value == Quantity{40.0, Unit::ns});
  const auto& half = std::get<MwStmt>(validated.statements[1]);
  CHECK(*half.duration.value == Quantity{20.0, Unit::ns});
  // input sequence untouched
  CHECK(!seq.validated);
  CHECK(std::get<MwStmt>(seq.statements[0]).duration.value == std::nullopt);
}

TEST_CASE("validate: angle form without calibration is an error") {
  ValidationContext vc = paper_vctx();
  vc.rabi_frequency_hz = std::nullopt;
  CHECK_THROWS_AS(validate(parse_text("mw pi\n"), vc), ParseError);
}

TEST_CASE("validate: unbound and wrongly-typed sweep variables") {
  CHECK_THROWS_AS(validate(parse_text("wait tau\n"), paper_vctx()), ParseError);
  // frequency-valued variable cannot fill a duration slot
  CHECK_THROWS_AS(
      validate(parse_text("sweep f 3GHz..4GHz n=3 {\n wait f\n}\n"), paper_vctx()),
      ParseError);
  // but it can fill the mw frequency slot
  CHECK_NOTHROW(
      validate(parse_text("sweep f 3.3GHz..3.4GHz n=3 {\n mw 40ns f=f\n}\n"), paper_vctx()));
}

TEST_CASE("validate: microwave frequencies must address a known transition") {
  CHECK_THROWS_AS(validate(parse_text("mw 40ns f=9GHz\n"), paper_vctx()), ParseError);
  CHECK_NOTHROW(validate(parse_text("mw 40ns f=3.35GHz\n"), paper_vctx()));
  ValidationContext vc = paper_vctx();
  vc.transition_freqs_ghz.clear();
  CHECK_THROWS_AS(validate(parse_text("mw 40ns f=3.35GHz\n"), vc), ParseError);
}

TEST_CASE("validate: sweep structural rules") {
  CHECK_THROWS_AS(validate(parse_text("sweep tau 0ms..2ms n=3 {\n}\n"), paper_vctx()),
                  ParseError);
  CHECK_THROWS_AS(
      validate(parse_text("sweep tau 0ms..2ms n=3 {\n wait 1ms\n}\n"), paper_vctx()),
      ParseError);
  CHECK_THROWS_AS(
      validate(parse_text("sweep tau 0ms..2ms n=3 {\n sweep tau 0ns..5ns n=3 {\n wait tau\n}\n}\n"),
               paper_vctx()),
      ParseError);
}

TEST_CASE("validate: total expanded duration is capped") {
  ValidationContext vc = paper_vctx();
  vc.max_total_duration_s = 1e-3;
  CHECK_THROWS_AS(validate(parse_text(kFig2e), vc), ParseError);
  vc.max_total_duration_s = 100.0;
  CHECK_NOTHROW(validate(parse_text(kFig2e), vc));
}

TEST_CASE("expand: one concrete sequence per grid point") {
  const auto validated = validate(parse_text(kFig2e), paper_vctx());
  const Expansion ex = expand(validated);
  REQUIRE(ex.sequences.size() == 41);
  REQUIRE(ex.sweep_names == std::vector<std::string>{"tau"});
  for (size_t i = 0; i < ex.sequences.size(); ++i) {
    CHECK(ex.sweep_values_si[i].size() == 1);
    CHECK(ex.sweep_values_si[i][0] == doctest::Approx(2e-3 * i / 40.0).epsilon(1e-12));
    // spliced body: laser, wait(tau), laser, measure, all concrete
    REQUIRE(ex.sequences[i].statements.size() == 4);
    const auto& wait = std::get<WaitStmt>(ex.sequences[i].statements[1]);
    REQUIRE(!wait.duration.is_variable());
    CHECK(wait.duration.value->si() == doctest::Approx(ex.sweep_values_si[i][0]).epsilon(1e-12));
  }
}

TEST_CASE("expand: nested sweeps produce the cartesian product") {
  const auto seq = parse_text(
      "sweep a 0ns..40ns n=5 {\n"
      "  sweep b 0ns..60ns n=7 {\n"
      "    mw a\n"
      "    wait b\n"
      "  }\n"
      "}\n");
  const Expansion ex = expand(validate(seq, paper_vctx()));
  REQUIRE(ex.sequences.size() == 35);
  REQUIRE(ex.sweep_names == std::vector<std::string>({"a", "b"}));
  // outer-major order, inner varies fastest
  CHECK(ex.sweep_values_si[0] == std::vector<double>({0.0, 0.0}));
  CHECK(ex.sweep_values_si[1][0] == 0.0);
  CHECK(ex.sweep_values_si[1][1] == doctest::Approx(1e-8));
  CHECK(ex.sweep_values_si[7][0] == doctest::Approx(1e-8));
}

TEST_CASE("expand: sweep-free input gives a singleton") {
  const auto seq = validate(parse_text("laser 1ms\nmeasure 1ms\n"), paper_vctx());
  const Expansion ex = expand(seq);
  REQUIRE(ex.sequences.size() == 1);
  CHECK(ex.sweep_names.empty());
  CHECK(ex.sequences[0].statements == seq.statements);
}

TEST_CASE("expand: fewer than two steps is a domain error") {
  const auto seq = parse_text("sweep tau 0ms..2ms n=1 {\n wait tau\n}\n");
  CHECK_THROWS_AS(expand(seq), std::domain_error);
}

TEST_CASE("serialize: canonical text and round trip") {
  const auto seq = parse_text(kFig2e);
  CHECK(parse_text(serialize(seq)) == seq);
  CHECK(serialize(parse_text("wait 0.00001s\n")) == "wait 10us\n");
  CHECK(serialize(PulseSequence{}).empty());
  // default-valued options are omitted
  CHECK(serialize(parse_text("laser 1ms power=1\n")) == "laser 1ms\n");
  CHECK(serialize(parse_text("mw 40ns a=1 phase=0\n")) == "mw 40ns\n");
  CHECK(serialize(parse_text("mw pi f=3.35GHz\n")) == "mw pi f=3.35GHz\n");
  CHECK(serialize(parse_text("laser 1ms power=0.5\n")) == "laser 1ms power=0.5\n");
}

namespace {

class RandomSequence {
 public:
  explicit RandomSequence(std::mt19937_64& rng) : rng_(rng) {}

  PulseSequence generate() {
    PulseSequence seq;
    const int n = 1 + static_cast<int>(rng_() % 5);
    for (int i = 0; i < n; ++i) seq.statements.push_back(statement(2));
    return seq;
  }

 private:
  std::mt19937_64& rng_;
  int sweep_counter_ = 0;

  double magnitude() { return static_cast<double>(rng_() % 10000) / 8.0; }

  Quantity time_qty() {
    static const Unit units[] = {Unit::ns, Unit::us, Unit::ms, Unit::s};
    return {magnitude(), units[rng_() % 4]};
  }

  Statement statement(int sweep_depth) {
    switch (rng_() % (sweep_depth > 0 ? 5 : 4)) {
      case 0: {
        LaserStmt s;
        s.duration = Arg{time_qty(), {}};
        if (rng_() % 2) s.power = Arg{Quantity{magnitude(), Unit::dimensionless}, {}};
        return s;
      }
      case 1: {
        WaitStmt s;
        s.duration = Arg{time_qty(), {}};
        return s;
      }
      case 2: {
        MwStmt s;
        const int form = static_cast<int>(rng_() % 3);
        if (form == 0)
          s.angle = MwAngle::pi;
        else if (form == 1)
          s.angle = MwAngle::half_pi;
        else
          s.duration = Arg{time_qty(), {}};
        if (rng_() % 2) {
          static const Unit funits[] = {Unit::hz, Unit::khz, Unit::mhz, Unit::ghz};
          s.frequency = Arg{Quantity{magnitude(), funits[rng_() % 4]}, {}};
        }
        if (rng_() % 2) s.amplitude = Arg{Quantity{magnitude(), Unit::dimensionless}, {}};
        if (rng_() % 2) s.phase = Arg{Quantity{magnitude(), Unit::dimensionless}, {}};
        return s;
      }
      case 3: {
        MeasureStmt s;
        s.window = Arg{time_qty(), {}};
        return s;
      }
      default: {
        SweepStmt s;
        s.variable = "v" + std::to_string(sweep_counter_++);
        s.start = time_qty();
        s.stop = time_qty();
        s.steps = 2 + static_cast<int>(rng_() % 40);
        WaitStmt ref;
        ref.duration = Arg{std::nullopt, s.variable};
        s.body.push_back(ref);
        const int extra = static_cast<int>(rng_() % 3);
        for (int i = 0; i < extra; ++i) s.body.push_back(statement(sweep_depth - 1));
        return s;
      }
    }
  }
};

}  // namespace

TEST_CASE("serialize/parse round trip over 10^4 random sequences") {
  std::mt19937_64 rng(20240817);
  RandomSequence gen(rng);
  for (int k = 0; k < 10000; ++k) {
    const PulseSequence seq = gen.generate();
    const std::string text = serialize(seq);
    PulseSequence back;
    try {
      back = parse_text(text);
    } catch (const ParseError& e) {
      MESSAGE("failed on:\n" << text << "\nerror: " << e.what());
      REQUIRE(false);
    }
    if (!(back == seq)) {
      MESSAGE("round trip mismatch on:\n" << text);
      CHECK(back == seq);
    }
  }
}
