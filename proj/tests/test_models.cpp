#include <catch2/catch_amalgamated.hpp>

#include "phsobs/models.hpp"
#include "test_helpers.hpp"

using namespace phsobs;

TEST_CASE("beam model is well posed for varying coefficients") {
  BeamParams p;
  p.rho = [](double z) { return 1.0 + 0.5 * z; };
  p.EI = [](double z) { return 2.0 - z * z; };
  p.damping = 0.1;
  ModelSpec m = beam_spec(p);
  REQUIRE(validate_system(m.system).all_passed());
  REQUIRE(sigma_residuals(m.io).max() < 1e-10);
  REQUIRE(m.system.coercivity_m > 0.0);
  REQUIRE(m.system.coercivity_m < m.system.coercivity_M);
}

TEST_CASE("negative beam damping is rejected") {
  BeamParams p;
  p.damping = -0.1;
  REQUIRE_THROWS_AS(beam_spec(p), StructuralError);
}

TEST_CASE("wave model is well posed and lossless") {
  for (double c : {0.5, 1.0, 3.0}) {
    ModelSpec m = wave_spec(c);
    REQUIRE(validate_system(m.system).all_passed());
    REQUIRE(sigma_residuals(m.io).max() < 1e-10);
    REQUIRE(m.system.P[0].norm() == 0.0);
    REQUIRE(m.system.H(0.3)(1, 1) == Catch::Approx(c * c));
  }
  REQUIRE_THROWS_AS(wave_spec(0.0), StructuralError);
}

TEST_CASE("partitioned structure detection") {
  SECTION("beam has the scalar split with zero first-order block") {
    auto part = detect_partitioned_structure(beam_spec().system);
    REQUIRE(part.has_value());
    REQUIRE(part->half_dim == 1);
    REQUIRE(part->Q1.norm() == 0.0);
    REQUIRE(part->Q2(0, 0) == Catch::Approx(1.0));
  }
  SECTION("first-order systems do not qualify") {
    REQUIRE_FALSE(detect_partitioned_structure(wave_spec().system).has_value());
  }
  SECTION("diagonal second-order coupling does not qualify") {
    SystemSpec s = beam_spec().system;
    s.P[2] = (Mat(2, 2) << 1.0, 0.0, 0.0, 1.0).finished();
    REQUIRE_FALSE(detect_partitioned_structure(s).has_value());
  }
  SECTION("cross-coupled energy density does not qualify") {
    SystemSpec s = beam_spec().system;
    s.H = [](double) {
      return (Mat(2, 2) << 1.0, 0.3, 0.3, 1.0).finished();
    };
    REQUIRE_FALSE(detect_partitioned_structure(s).has_value());
  }
  SECTION("singular Q2 does not qualify") {
    SystemSpec s = beam_spec().system;
    s.P[2] = Mat::Zero(2, 2);
    REQUIRE_FALSE(detect_partitioned_structure(s).has_value());
  }
}

TEST_CASE("named presets") {
  Preset b3 = preset("beam-3m");
  REQUIRE(b3.model.io.C_m.rows() == 3);
  REQUIRE(b3.model.io.C_m.cols() == 4);
  REQUIRE((b3.model.io.L - Mat::Identity(3, 3)).norm() == 0.0);
  // measured rows are the last three boundary outputs
  REQUIRE((b3.model.io.C_m - Mat::Identity(4, 4).bottomRows(3)).norm() == 0.0);

  Preset b2 = preset("beam-2m");
  REQUIRE(b2.model.io.C_m.rows() == 2);
  REQUIRE(b2.model.io.L(0, 0) == Catch::Approx(0.1));
  REQUIRE(b2.model.io.L(1, 1) == Catch::Approx(1.0));

  Preset w = preset("wave");
  REQUIRE(w.model.io.C_m.rows() == 2);
  REQUIRE(w.model.system.order == 1);

  REQUIRE(b3.default_nd == 140);
  REQUIRE_THROWS_AS(preset("no-such-model"), StructuralError);
}
