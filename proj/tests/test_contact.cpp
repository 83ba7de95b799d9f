#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "grasp/contact.hpp"
#include "oracles/convex_distance.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

using Eigen::Vector3d;
using Eigen::VectorXd;
using grasp::contact::build_frame;
using grasp::contact::ContactFrame;
using grasp::contact::force_from_weights;
using grasp::contact::grasp_matrix;
using grasp::contact::pyramid_edges;
using grasp::contact::wrench_basis;

namespace {

Vector3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector3d v(gauss(rng), gauss(rng), gauss(rng));
  while (v.norm() < 1e-6) v = Vector3d(gauss(rng), gauss(rng), gauss(rng));
  return v.normalized();
}

}  // namespace

TEST_CASE("contact frame is right-handed orthonormal and deterministic") {
  std::mt19937_64 rng(71001);
  std::vector<Vector3d> normals;
  for (int t = 0; t < 200; ++t) normals.push_back(random_unit(rng));
  normals.push_back(Vector3d::UnitX());
  normals.push_back(-Vector3d::UnitX());
  normals.push_back(Vector3d(0.9995, 0.02, 0.0).normalized());

  for (const Vector3d& n : normals) {
    const Vector3d p = random_unit(rng) * 0.1;
    const ContactFrame f = build_frame(p, n);
    CHECK(f.p == p);
    CHECK(f.n == n);
    CHECK(std::abs(f.d.norm() - 1.0) < 1e-12);
    CHECK(std::abs(f.e.norm() - 1.0) < 1e-12);
    CHECK(std::abs(f.d.dot(f.n)) < 1e-12);
    CHECK(std::abs(f.e.dot(f.n)) < 1e-12);
    CHECK(std::abs(f.d.dot(f.e)) < 1e-12);
    CHECK((f.d.cross(f.e) - f.n).norm() < 1e-12);

    const ContactFrame again = build_frame(p, n);
    CHECK(again.d == f.d);
    CHECK(again.e == f.e);
  }
}

TEST_CASE("grasp matrix maps a force to its object wrench") {
  std::mt19937_64 rng(71002);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    const Vector3d p(gauss(rng), gauss(rng), gauss(rng));
    const Vector3d f(gauss(rng), gauss(rng), gauss(rng));
    const Eigen::Matrix<double, 6, 1> w = grasp_matrix(p) * f;
    CHECK((w.head<3>() - f).norm() < 1e-14);
    CHECK((w.tail<3>() - p.cross(f)).norm() < 1e-13);
  }
}

TEST_CASE("pyramid edges have unit normal component and cone-boundary tangent") {
  std::mt19937_64 rng(71003);
  for (int t = 0; t < 50; ++t) {
    const ContactFrame f = build_frame(Vector3d::Zero(), random_unit(rng));
    const double mu = 0.2 + 0.8 * (t % 5) / 4.0;
    const int k = 3 + (t % 8);
    const auto edges = pyramid_edges(f, mu, k);
    REQUIRE(edges.cols() == k);
    for (int j = 0; j < k; ++j) {
      CHECK(std::abs(edges.col(j).dot(f.n) - 1.0) < 1e-12);
      const Vector3d tang = edges.col(j) - f.n;
      CHECK(std::abs(tang.norm() - mu) < 1e-12);
    }
    CHECK((edges.col(0) - (f.n + mu * f.d)).norm() < 1e-12);
    // First-harmonic sums over the regular polygon vanish.
    CHECK((edges.rowwise().sum() - double(k) * f.n).norm() < 1e-10);
  }

  const ContactFrame f = build_frame(Vector3d::Zero(), Vector3d::UnitZ());
  CHECK_THROWS_AS((void)pyramid_edges(f, 0.5, 2), std::invalid_argument);
  CHECK_THROWS_AS((void)pyramid_edges(f, 0.0, 8), std::invalid_argument);
  CHECK_THROWS_AS((void)pyramid_edges(f, -0.3, 8), std::invalid_argument);
}

TEST_CASE("weighted edge forces stay in the friction cone") {
  std::mt19937_64 rng(71004);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double mu = 0.6;
  const int k = 8;
  for (int t = 0; t < 100; ++t) {
    const ContactFrame f = build_frame(Vector3d::Zero(), random_unit(rng));
    const auto edges = pyramid_edges(f, mu, k);
    VectorXd lambda(k);
    for (int j = 0; j < k; ++j) lambda[j] = unit(rng);
    const Vector3d force = force_from_weights(edges, lambda);
    const double fn = force.dot(f.n);
    CHECK(std::abs(fn - lambda.sum()) < 1e-12);
    const Vector3d ft = force - fn * f.n;
    CHECK(ft.norm() <= mu * fn + 1e-12);
  }
  CHECK_THROWS_AS(
      (void)force_from_weights(
          pyramid_edges(build_frame(Vector3d::Zero(), Vector3d::UnitZ()), mu, k),
          VectorXd::Ones(5)),
      std::invalid_argument);
}

TEST_CASE("pyramid spans the inscribed cone and no more") {
  // With unit weight sum the reachable tangential set is the polygon with
  // vertices mu * (cos, sin) at the edge angles: it contains the disc of
  // radius mu*cos(pi/k) and is contained in the disc of radius mu.
  const double mu = 0.6;
  const int k = 8;
  const ContactFrame f = build_frame(Vector3d(0.1, -0.2, 0.05),
                                     Vector3d(0.3, -0.5, 0.8).normalized());
  const auto edges = pyramid_edges(f, mu, k);
  std::vector<Vector3d> cloud;
  for (int j = 0; j < k; ++j) {
    const Vector3d e = edges.col(j);
    cloud.emplace_back(e.dot(f.d), e.dot(f.e), e.dot(f.n));
  }

  const auto hull_gap = [&cloud](const Vector3d& target) {
    Eigen::Matrix3Xd w(3, cloud.size());
    for (size_t j = 0; j < cloud.size(); ++j) w.col(int(j)) = cloud[j] - target;
    return oracle::min_norm_in_hull(w);
  };

  const double inner = mu * std::cos(std::numbers::pi / k);
  std::mt19937_64 rng(71005);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  for (int t = 0; t < 40; ++t) {
    const double phi = angle(rng);
    auto cert = hull_gap(Vector3d(inner * 0.999 * std::cos(phi),
                                  inner * 0.999 * std::sin(phi), 1.0));
    REQUIRE(cert.gap <= 1e-9);
    CHECK(cert.upper() < 1e-6);

    cert = hull_gap(
        Vector3d(mu * 1.05 * std::cos(phi), mu * 1.05 * std::sin(phi), 1.0));
    REQUIRE(cert.gap <= 1e-9);
    CHECK(cert.lower() > 1e-4);
  }
}

TEST_CASE("wrench basis stacks per-contact blocks and is linear") {
  std::mt19937_64 rng(71006);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double mu = 0.6;
  const int k = 8;
  std::vector<ContactFrame> frames;
  for (int i = 0; i < 3; ++i)
    frames.push_back(build_frame(Vector3d(gauss(rng), gauss(rng), gauss(rng)) * 0.1,
                                 random_unit(rng)));

  const Eigen::MatrixXd w = wrench_basis(frames, mu, k);
  REQUIRE(w.rows() == 6);
  REQUIRE(w.cols() == 3 * k);
  for (int i = 0; i < 3; ++i) {
    const Eigen::MatrixXd block =
        grasp_matrix(frames[i].p) * pyramid_edges(frames[i], mu, k);
    CHECK((w.middleCols(i * k, k) - block).norm() < 1e-13);
  }

  VectorXd lambda(3 * k);
  for (int j = 0; j < 3 * k; ++j) lambda[j] = std::abs(gauss(rng));
  Eigen::Matrix<double, 6, 1> expect = Eigen::Matrix<double, 6, 1>::Zero();
  for (int i = 0; i < 3; ++i) {
    const Vector3d force =
        force_from_weights(pyramid_edges(frames[i], mu, k), lambda.segment(i * k, k));
    expect.head<3>() += force;
    expect.tail<3>() += frames[i].p.cross(force);
  }
  CHECK((w * lambda - expect).norm() < 1e-12);
}
