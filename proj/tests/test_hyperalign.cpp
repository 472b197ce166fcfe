#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "voxstate/hyperalign.hpp"
#include "voxstate/svd.hpp"

using namespace voxstate;

namespace {

Matrix random_mat(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  REQUIRE(a.same_shape(b));
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

double orthogonality_defect(const Matrix& r) {
  Matrix rtr = matmul_at_b(r, r);
  double worst = 0.0;
  for (std::size_t i = 0; i < rtr.rows(); ++i)
    for (std::size_t j = 0; j < rtr.cols(); ++j)
      worst = std::max(worst, std::abs(rtr(i, j) - (i == j ? 1.0 : 0.0)));
  return worst;
}

// Subjects sharing one latent series Z, each seen through its own
// orthogonal mixing, plus optional noise.
std::vector<SubjectMatrix> mixed_subjects(std::size_t p, std::size_t n,
                                          std::size_t m, double noise,
                                          std::uint64_t seed) {
  Rng rng(seed);
  Matrix z = random_mat(n, m, rng);
  std::vector<SubjectMatrix> subjects;
  for (std::size_t j = 0; j < p; ++j) {
    Rng qr = rng.derive(100 + j);
    Matrix q = random_orthogonal(m, qr);
    Matrix zj = z;
    if (noise > 0.0) {
      Rng nr = rng.derive(200 + j);
      for (std::size_t i = 0; i < zj.size(); ++i)
        zj.data()[i] += noise * nr.normal();
    }
    subjects.push_back({"s" + std::to_string(j), matmul_a_bt(zj, q)});
  }
  return subjects;
}

}  // namespace

TEST_CASE("procrustes matches an external linear algebra package") {
  Matrix x(4, 3, {1.0, 0.2, -0.3,   //
                  0.5, 2.0, 0.1,    //
                  -1.0, 0.3, 0.8,   //
                  0.0, -0.5, 1.5});
  Matrix t(4, 3, {0.8, 0.1, 0.4,    //
                  0.2, 1.9, -0.7,   //
                  -0.9, 0.6, 0.3,   //
                  0.4, -0.2, 1.2});
  ProcrustesResult res = procrustes_rotation(x, t);
  CHECK(res.unique);
  const double expect[9] = {
      0.9945405759058441,   0.09265932549023131, 0.04799262731469387,
      -0.07014606757235617, 0.9341451702810999,  -0.3499318934373213,
      -0.07725653422854387, 0.3446549727483848,  0.9355449629380751};
  for (std::size_t i = 0; i < 9; ++i)
    CHECK(std::abs(res.rotation.data()[i] - expect[i]) < 1e-12);

  Matrix fitted = matmul(x, res.rotation);
  double resid = 0.0;
  for (std::size_t i = 0; i < fitted.size(); ++i) {
    const double d = fitted.data()[i] - t.data()[i];
    resid += d * d;
  }
  CHECK(std::sqrt(resid) == doctest::Approx(1.074116299903003).epsilon(1e-12));
}

TEST_CASE("procrustes recovers a planted rotation") {
  for (std::uint64_t seed : {21u, 22u, 23u}) {
    Rng rng(seed);
    Matrix t = random_mat(12, 6, rng);
    Rng qr = rng.derive(1);
    Matrix q = random_orthogonal(6, qr);
    Matrix x = matmul_a_bt(t, q);
    ProcrustesResult res = procrustes_rotation(x, t);
    CHECK(max_abs_diff(res.rotation, q) < 1e-10);
    CHECK(orthogonality_defect(res.rotation) < 1e-12);
  }
}

TEST_CASE("procrustes is scale invariant and always orthogonal") {
  Rng rng(31);
  Matrix x = random_mat(10, 5, rng);
  Matrix t = random_mat(10, 5, rng);
  Matrix r1 = procrustes_rotation(x, t).rotation;
  Matrix x_scaled = x;
  for (std::size_t i = 0; i < x_scaled.size(); ++i) x_scaled.data()[i] *= 2.5;
  Matrix r2 = procrustes_rotation(x_scaled, t).rotation;
  CHECK(max_abs_diff(r1, r2) < 1e-12);
  CHECK(orthogonality_defect(r1) < 1e-12);

  // Rotation preserves the Frobenius norm of what it rotates.
  Matrix rotated = matmul(x, r1);
  CHECK(frobenius_norm(rotated) ==
        doctest::Approx(frobenius_norm(x)).epsilon(1e-12));
}

TEST_CASE("procrustes flags rank-deficient cross products") {
  Rng rng(33);
  Matrix x = random_mat(6, 4, rng);
  Matrix t = random_mat(6, 4, rng);
  for (std::size_t i = 0; i < 6; ++i) x(i, 3) = 0.0;
  ProcrustesResult res = procrustes_rotation(x, t);
  CHECK_FALSE(res.unique);
  CHECK(orthogonality_defect(res.rotation) < 1e-12);

  Matrix t_bad(5, 4);
  CHECK_THROWS_AS(procrustes_rotation(x, t_bad), config_error);
}

TEST_CASE("first-pass alignment blends into the unweighted mean") {
  std::vector<SubjectMatrix> subjects = mixed_subjects(4, 15, 5, 0.3, 41);
  AlignmentStep step = level1_align(subjects, 0);
  REQUIRE(step.rotations.size() == 4);
  REQUIRE(step.aligned.size() == 4);

  // The reference subject is untouched.
  CHECK(max_abs_diff(step.aligned[0], subjects[0].x) == 0.0);
  CHECK(orthogonality_defect(step.rotations[0]) == 0.0);
  for (std::size_t j = 1; j < 4; ++j) {
    CHECK(orthogonality_defect(step.rotations[j]) < 1e-12);
    Matrix expect = matmul(subjects[j].x, step.rotations[j]);
    CHECK(max_abs_diff(step.aligned[j], expect) == 0.0);
  }

  Matrix mean(15, 5);
  for (const Matrix& a : step.aligned)
    for (std::size_t i = 0; i < mean.size(); ++i)
      mean.data()[i] += a.data()[i] / 4.0;
  CHECK(max_abs_diff(step.reference, mean) < 1e-12);

  CHECK_THROWS_AS(level1_align({subjects[0]}, 0), config_error);
  CHECK_THROWS_AS(level1_align(subjects, 9), config_error);
}

TEST_CASE("refinement rotations compose all passes") {
  std::vector<SubjectMatrix> subjects = mixed_subjects(4, 15, 5, 0.3, 43);
  AlignmentStep l1 = level1_align(subjects, 0);
  AlignmentStep l2 = level2_refine(l1.aligned, l1.reference, 3);
  for (std::size_t j = 0; j < 4; ++j) {
    Matrix expect = matmul(l1.aligned[j], l2.rotations[j]);
    CHECK(max_abs_diff(l2.aligned[j], expect) < 1e-10);
    CHECK(orthogonality_defect(l2.rotations[j]) < 1e-10);
  }
  CHECK_THROWS_AS(level2_refine(l1.aligned, l1.reference, 0), config_error);
}

TEST_CASE("pairwise agreement never drops across refinement passes") {
  std::vector<SubjectMatrix> subjects = mixed_subjects(5, 20, 6, 0.5, 47);
  AlignmentStep l1 = level1_align(subjects, 0);
  double prev = mean_pairwise_correlation(l1.aligned);
  for (std::size_t q = 1; q <= 4; ++q) {
    AlignmentStep l2 = level2_refine(l1.aligned, l1.reference, q);
    const double corr = mean_pairwise_correlation(l2.aligned);
    CHECK(corr >= prev - 1e-9);
    prev = corr;
  }
}

TEST_CASE("noise-free mixtures align almost perfectly") {
  std::vector<SubjectMatrix> subjects = mixed_subjects(4, 25, 6, 0.0, 53);
  CommonSpace space = hyperalign_fit(subjects, {0, 3});
  std::vector<Matrix> aligned;
  for (const SubjectMatrix& s : subjects)
    aligned.push_back(hyperalign_transform(space, s));
  CHECK(mean_pairwise_correlation(aligned) >= 0.999);
}

TEST_CASE("fit publishes a unit-norm reference and replayable rotations") {
  std::vector<SubjectMatrix> subjects = mixed_subjects(4, 18, 5, 0.2, 59);
  CommonSpace space = hyperalign_fit(subjects, {0, 2});
  CHECK(frobenius_norm(space.t) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(space.q == 2);
  REQUIRE(space.subject_ids.size() == 4);
  REQUIRE(space.w_schedule.size() == 3);
  CHECK(space.w_schedule[0] == 0.5);
  CHECK(space.w_schedule[2] == 0.25);

  // Transforming a training subject replays its stored rotation exactly:
  // both sides normalize, solve against the frozen reference, multiply.
  for (std::size_t j = 0; j < 4; ++j) {
    Matrix xn = subjects[j].x;
    frobenius_normalize(xn);
    Matrix expect = matmul(xn, space.rotations[j]);
    Matrix got = hyperalign_transform(space, subjects[j]);
    CHECK(max_abs_diff(got, expect) == 0.0);
  }

  SubjectMatrix wrong{"w", Matrix(3, 3)};
  CHECK_THROWS_AS(hyperalign_transform(space, wrong), config_error);
}

TEST_CASE("mean pairwise correlation on hand-built matrices") {
  Matrix a(2, 2, {1.0, 2.0, 3.0, 4.0});
  Matrix b(2, 2, {2.0, 4.0, 6.0, 8.0});
  Matrix c(2, 2, {4.0, 3.0, 2.0, 1.0});
  CHECK(mean_pairwise_correlation({a, b}) == doctest::Approx(1.0));
  CHECK(mean_pairwise_correlation({a, c}) == doctest::Approx(-1.0));
  // Three pairs: (a,b)=1, (a,c)=-1, (b,c)=-1 -> mean -1/3.
  CHECK(mean_pairwise_correlation({a, b, c}) ==
        doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
  CHECK_THROWS_AS(mean_pairwise_correlation({a}), config_error);
  Matrix flat(2, 2, {5.0, 5.0, 5.0, 5.0});
  CHECK_THROWS_AS(mean_pairwise_correlation({a, flat}), numeric_error);
}

TEST_CASE("alignment checkpoint round-trips bitwise") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "space.haln").string();
  std::vector<SubjectMatrix> subjects = mixed_subjects(3, 12, 4, 0.1, 61);
  FeatureSelection sel;
  sel.m = 2;
  sel.indices = {1, 3};
  sel.f_scores = {0.5, 9.0, std::numeric_limits<double>::infinity(), 7.0};
  CommonSpace space = hyperalign_fit(subjects, {0, 1}, sel);
  write_common_space(path, space);
  CommonSpace back = read_common_space(path);

  CHECK(max_abs_diff(back.t, space.t) == 0.0);
  REQUIRE(back.rotations.size() == space.rotations.size());
  for (std::size_t j = 0; j < back.rotations.size(); ++j)
    CHECK(max_abs_diff(back.rotations[j], space.rotations[j]) == 0.0);
  CHECK(back.selection.m == sel.m);
  CHECK(back.selection.indices == sel.indices);
  CHECK(back.selection.f_scores == sel.f_scores);
  // Ids and fitting knobs are not part of the checkpoint format.
  CHECK(back.subject_ids.empty());
  CHECK(back.q == 0);
  std::remove(path.c_str());
}

TEST_CASE("alignment checkpoint reader rejects corruption") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "space_bad.haln").string();
  std::vector<SubjectMatrix> subjects = mixed_subjects(3, 12, 4, 0.1, 67);
  CommonSpace space = hyperalign_fit(subjects);
  write_common_space(path, space);

  SUBCASE("bad magic") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("NOPE", 4);
    f.close();
    CHECK_THROWS_AS(read_common_space(path), format_error);
  }
  SUBCASE("truncation names the offset") {
    std::filesystem::resize_file(path, 50);
    try {
      read_common_space(path);
      FAIL("expected format_error");
    } catch (const format_error& e) {
      CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }
  }
  std::remove(path.c_str());
}
