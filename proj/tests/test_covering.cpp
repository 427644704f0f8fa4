#include <ensctl/covering.hpp>
#include <ensctl/larc.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

namespace ensctl {
namespace {

std::set<std::set<std::string>> label_sets(const Cover& c) {
  std::set<std::set<std::string>> out;
  for (const auto& t : c.triples) {
    std::set<std::string> s;
    for (int k : t.index) s.insert(c.basis[static_cast<std::size_t>(k)].label);
    out.insert(s);
  }
  return out;
}

int span_rank(const Cover& c) {
  Eigen::MatrixXd m(c.basis.size(), 3 * c.triples.size());
  Eigen::Index col = 0;
  for (const auto& t : c.triples)
    for (const auto& x : t.matrices) m.col(col++) = coordinates(GroupKind::SO, c.basis, x);
  return static_cast<int>(Eigen::FullPivLU<Eigen::MatrixXd>(m).rank());
}

TEST(CoverSoN, MinimalFourIsTheSo4Example) {
  const Cover c = cover_so_n(4, CoverMode::minimal);
  ASSERT_EQ(c.triples.size(), 4u);
  const std::set<std::set<std::string>> expected{{"Omega_12", "Omega_13", "Omega_23"},
                                                 {"Omega_12", "Omega_24", "Omega_14"},
                                                 {"Omega_13", "Omega_14", "Omega_34"},
                                                 {"Omega_23", "Omega_34", "Omega_24"}};
  EXPECT_EQ(label_sets(c), expected);
}

TEST(CoverSoN, Examples) {
  EXPECT_EQ(cover_so_n(3, CoverMode::minimal).triples.size(), 1u);
  const Cover full5 = cover_so_n(5, CoverMode::full);
  EXPECT_EQ(full5.triples.size(), 30u);
  EXPECT_EQ(span_rank(full5), 10);
  try {
    cover_so_n(2, CoverMode::minimal);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_dimension);
  }
}

TEST(CoverSoN, TriplesAreSo3AndSpan) {
  for (int n = 3; n <= 7; ++n) {
    for (CoverMode mode : {CoverMode::minimal, CoverMode::full}) {
      const Cover c = cover_so_n(n, mode);
      EXPECT_EQ(span_rank(c), n * (n - 1) / 2);
      for (const auto& t : c.triples) {
        std::vector<AlgebraElement> g;
        for (const auto& m : t.matrices) g.push_back({m, GroupKind::SO, std::nullopt});
        EXPECT_EQ(lie_closure(g, GroupKind::SO, n * (n - 1) / 2).dimension, 3);
        EXPECT_TRUE(spin_triple_check(t.matrices[0], t.matrices[1], t.matrices[2], 0.0).passed);
      }
    }
    const auto minimal = label_sets(cover_so_n(n, CoverMode::minimal));
    const auto full = label_sets(cover_so_n(n, CoverMode::full));
    EXPECT_TRUE(std::includes(full.begin(), full.end(), minimal.begin(), minimal.end()));
  }
}

TEST(SpinTripleCheck, Examples) {
  const Matrix b1 = su2_spin(0).matrix, b2 = su2_spin(1).matrix, b3 = su2_spin(2).matrix;
  EXPECT_TRUE(spin_triple_check(b1, b2, b3, 1e-12).passed);
  // Omega_x, Omega_y, Omega_z in so(3).
  EXPECT_TRUE(spin_triple_check(-omega(3, 1, 2), omega(3, 0, 2), -omega(3, 0, 1), 1e-12).passed);
  const auto bad = spin_triple_check(b1, b2, 2.0 * b3, 1e-12);
  EXPECT_FALSE(bad.passed);
  EXPECT_EQ(*bad.violated, "[B1,B2] != B3");
}

TEST(SpinTripleCheck, PrintedNormalisationFailsBySqrtTwo) {
  // Pauli matrices times i/sqrt(2): [B1,B2] = sqrt(2) B3.
  const double r = std::sqrt(2.0);
  const Matrix b1 = r * su2_spin(0).matrix, b2 = r * su2_spin(1).matrix, b3 = r * su2_spin(2).matrix;
  const auto c = spin_triple_check(b1, b2, b3, 1e-12);
  EXPECT_FALSE(c.passed);
  EXPECT_LT(max_abs(commutator(b1, b2) - r * b3), 1e-15);
}

TEST(CoverFromTriples, Examples) {
  const auto basis = standard_basis(GroupKind::SO, 4);
  auto ix = [](int i, int j) { return so_index(4, i - 1, j - 1); };
  const std::vector<std::array<int, 3>> so4{{ix(1, 2), ix(1, 3), ix(2, 3)},
                                           {ix(1, 2), ix(2, 4), ix(1, 4)},
                                           {ix(1, 3), ix(1, 4), ix(3, 4)},
                                           {ix(2, 3), ix(3, 4), ix(2, 4)}};
  EXPECT_EQ(cover_from_triples(basis, so4).triples.size(), 4u);
  try {
    cover_from_triples(basis, {so4[0], so4[1]});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::cover_incomplete);
    EXPECT_NE(std::string(e.what()).find("Omega_34"), std::string::npos);
  }
  EXPECT_NO_THROW(cover_from_triples(standard_basis(GroupKind::SO, 3), {{0, 1, 2}}));
  // Spin basis of su(2) covers itself.
  EXPECT_NO_THROW(cover_from_triples(standard_basis(GroupKind::SU2, 2), {{0, 1, 2}}));
}

TEST(CoverFromTriples, RejectsNonSubalgebra) {
  const auto basis = standard_basis(GroupKind::SO, 4);
  EXPECT_THROW(cover_from_triples(basis, {{so_index(4, 0, 1), so_index(4, 2, 3), so_index(4, 0, 2)}}), Error);
}

TEST(RootTriple, Examples) {
  Matrix h(2, 2), x = Matrix::Zero(2, 2);
  h << 1, 0, 0, -1;
  x(0, 1) = 1.0;
  const SpinTriple t = su2_triple_from_root({h, x});
  EXPECT_TRUE(t.certificate.passed);
  // The triple is (B3, B1, B2) of the spin basis.
  EXPECT_LT(max_abs(t.b1 - su2_spin(2).matrix), 1e-15);
  EXPECT_LT(max_abs(t.b2 - su2_spin(0).matrix), 1e-15);
  EXPECT_LT(max_abs(t.b3 - su2_spin(1).matrix), 1e-15);
  try {
    su2_triple_from_root({0.5 * h, x});  // [H,X] = X
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::root_data);
  }
}

Matrix random_unitary(int n, std::mt19937& rng) {
  std::normal_distribution<double> g;
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = Complex(g(rng), g(rng));
  Eigen::HouseholderQR<Matrix> qr(a);
  return qr.householderQ() * Matrix::Identity(n, n);
}

TEST(RootTriple, RandomisedValidData) {
  std::mt19937 rng(43);
  std::uniform_real_distribution<double> phase(0.0, 2 * M_PI);
  std::uniform_int_distribution<int> pick(0, 3);
  for (int trial = 0; trial < 20; ++trial) {
    for (int size : {2, 4}) {
      Matrix h = Matrix::Zero(size, size), x = Matrix::Zero(size, size);
      int a = 0, b = 1;
      if (size == 4) {
        do {
          a = pick(rng);
          b = pick(rng);
        } while (a == b);
      }
      h(a, a) = 1.0;
      h(b, b) = -1.0;
      x(a, b) = std::polar(1.0, phase(rng));
      const Matrix u = random_unitary(size, rng);
      const RootDatum d{u * h * u.adjoint(), u * x * u.adjoint()};
      const SpinTriple t = su2_triple_from_root(d);
      EXPECT_TRUE(t.certificate.passed) << "size " << size;
      EXPECT_TRUE(spin_triple_check(t.b1, t.b2, t.b3, 1e-10).passed);
    }
  }
}

}  // namespace
}  // namespace ensctl
