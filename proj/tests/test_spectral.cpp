// Spectral core: multiplier, flow, projections, dealiased products, pairings,
// norms, transforms, and the Hermitian-closure property.

#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <random>
#include <sstream>

#include "bbm/random.hpp"
#include "bbm/solver.hpp"
#include "bbm/spectral.hpp"

using namespace bbm;

namespace {

SpectralField random_hermitian(const GridSpec& grid, std::uint64_t key) {
    Rng rng(key);
    SpectralField f(grid);
    f.set_mode_pair(0, cd(rng.next_normal(), 0.0));
    for (int n = 1; n <= grid.mode_bound; ++n) f.set_mode_pair(n, rng.next_complex_normal());
    return f;
}

// O(M^2) reference convolution truncated to the retained modes.
SpectralField direct_convolution(const SpectralField& f, const SpectralField& g) {
    const int m = f.mode_bound();
    SpectralField out(f.grid());
    for (int n = -m; n <= m; ++n) {
        cd acc(0.0, 0.0);
        for (int a = -m; a <= m; ++a) {
            const int b = n - a;
            if (b < -m || b > m) continue;
            acc += f.coeff(a) * g.coeff(b);
        }
        out.set_coeff(n, acc);
    }
    return out;
}

}  // namespace

TEST_CASE("multiplier symbol", "[spectral]") {
    CHECK(phi_symbol(0) == cd(0.0, 0.0));
    CHECK(phi_symbol(1) == cd(0.0, -0.5));
    CHECK(std::abs(phi_symbol(-2) - cd(0.0, 0.4)) < 1e-16);
    for (long long n = -40; n <= 40; ++n) {
        CHECK(std::abs(phi_symbol(n) + phi_symbol(-n)) < 1e-16);  // odd
        CHECK(phi_symbol(n).real() == 0.0);                       // imaginary
        CHECK(std::abs(phi_symbol(n)) <= 0.5 + 1e-16);
    }
}

TEST_CASE("semigroup is a unitary group", "[spectral]") {
    const GridSpec grid = GridSpec::with_mode_bound(12);
    const SpectralField f = random_hermitian(grid, 7);

    SECTION("t = 0 is the identity") {
        const SpectralField g = semigroup_apply(f, 0.0);
        for (int n = -12; n <= 12; ++n) CHECK(g.coeff(n) == f.coeff(n));
    }
    SECTION("single mode pair rotates by -t/2") {
        SpectralField e1(grid);
        e1.set_mode_pair(1, cd(1.0, 0.0));
        const double t = 0.7;
        const SpectralField g = semigroup_apply(e1, t);
        CHECK(std::abs(g.coeff(1) - std::polar(1.0, -0.5 * t)) < 1e-15);
        CHECK(std::abs(g.coeff(-1) - std::polar(1.0, +0.5 * t)) < 1e-15);
    }
    SECTION("norms preserved for every index") {
        for (double s : {-0.7, 0.0, 1.0, 2.5}) {
            const double before = h_norm(f, s);
            const double after = h_norm(semigroup_apply(f, 3.21), s);
            CHECK(std::abs(before - after) <= 1e-12 * std::max(1.0, before));
        }
    }
    SECTION("group law") {
        const SpectralField a = semigroup_apply(semigroup_apply(f, 0.4), 1.3);
        const SpectralField b = semigroup_apply(f, 1.7);
        for (int n = -12; n <= 12; ++n) CHECK(std::abs(a.coeff(n) - b.coeff(n)) < 1e-14);
    }
    SECTION("negative times invert") {
        const SpectralField a = semigroup_apply(semigroup_apply(f, 2.0), -2.0);
        for (int n = -12; n <= 12; ++n) CHECK(std::abs(a.coeff(n) - f.coeff(n)) < 1e-14);
    }
}

TEST_CASE("dirichlet projector", "[spectral]") {
    const GridSpec grid = GridSpec::with_mode_bound(10);
    const SpectralField f = random_hermitian(grid, 11);

    SECTION("full projector is the identity") {
        const SpectralField g = dirichlet_project(f, grid.mode_bound);
        for (int n = -10; n <= 10; ++n) CHECK(g.coeff(n) == f.coeff(n));
    }
    SECTION("kills everything above N") {
        SpectralField e2(grid);
        e2.set_mode_pair(2, cd(0.3, 0.1));
        const SpectralField g = dirichlet_project(e2, 1);
        CHECK(h_norm(g, 0.0) == 0.0);
    }
    SECTION("composition law P_N P_K = P_min(N,K)") {
        for (int n1 : {2, 5, 9})
            for (int n2 : {3, 5, 10}) {
                const SpectralField a = dirichlet_project(dirichlet_project(f, n1), n2);
                const SpectralField b = dirichlet_project(f, std::min(n1, n2));
                for (int n = -10; n <= 10; ++n) CHECK(a.coeff(n) == b.coeff(n));
            }
    }
    SECTION("zero-mode drop") {
        const SpectralField g = dirichlet_project(f, 10, true);
        CHECK(g.coeff(0) == cd(0.0, 0.0));
        CHECK(g.coeff(3) == f.coeff(3));
    }
    SECTION("idempotent") {
        const SpectralField a = dirichlet_project(f, 4);
        const SpectralField b = dirichlet_project(a, 4);
        for (int n = -10; n <= 10; ++n) CHECK(a.coeff(n) == b.coeff(n));
    }
}

TEST_CASE("quadratic product", "[spectral]") {
    SECTION("constants square") {
        const GridSpec grid = GridSpec::with_mode_bound(4);
        SpectralField c(grid);
        c.set_mode_pair(0, cd(1.7, 0.0));
        const SpectralField sq = quadratic_product(c, c);
        CHECK(std::abs(sq.coeff(0) - cd(1.7 * 1.7, 0.0)) < 1e-14);
        for (int n = 1; n <= 4; ++n) CHECK(std::abs(sq.coeff(n)) < 1e-15);
    }
    SECTION("cos^2 x = 1/2 + cos(2x)/2") {
        const GridSpec grid = GridSpec::with_mode_bound(4);
        SpectralField c(grid);
        c.set_mode_pair(1, cd(0.5, 0.0));
        const SpectralField sq = quadratic_product(c, c);
        CHECK(std::abs(sq.coeff(0) - cd(0.5, 0.0)) < 1e-14);
        CHECK(std::abs(sq.coeff(2) - cd(0.25, 0.0)) < 1e-14);
        CHECK(std::abs(sq.coeff(1)) < 1e-15);
    }
    SECTION("matches the direct convolution sum") {
        for (int m : {4, 8, 16, 32}) {
            const GridSpec grid = GridSpec::with_mode_bound(m);
            const SpectralField f = random_hermitian(grid, 100 + static_cast<std::uint64_t>(m));
            const SpectralField g = random_hermitian(grid, 200 + static_cast<std::uint64_t>(m));
            const SpectralField fast = quadratic_product(f, g);
            const SpectralField slow = direct_convolution(f, g);
            double err = 0.0;
            for (int n = -m; n <= m; ++n) err = std::max(err, std::abs(fast.coeff(n) - slow.coeff(n)));
            CHECK(err < 1e-12);
        }
    }
    SECTION("grid mismatch throws") {
        const SpectralField a(GridSpec::with_mode_bound(4));
        const SpectralField b(GridSpec::with_mode_bound(8));
        CHECK_THROWS_AS(quadratic_product(a, b), std::invalid_argument);
    }
}

TEST_CASE("pairing", "[spectral]") {
    const GridSpec grid = GridSpec::with_mode_bound(8);
    const TestFunction psi = cosine_test_function(grid, 1);

    SECTION("orthogonality") {
        SpectralField e2(grid);
        e2.set_mode_pair(2, cd(1.0, 0.0));
        CHECK(pairing(e2, psi) == 0.0);
    }
    SECTION("<cos, cos> = 1/2") {
        SpectralField c(grid);
        c.set_mode_pair(1, cd(0.5, 0.0));
        CHECK(std::abs(pairing(c, psi) - 0.5) < 1e-15);
    }
    SECTION("bilinear") {
        const SpectralField f = random_hermitian(grid, 5);
        const SpectralField g = random_hermitian(grid, 6);
        SpectralField comb(grid);
        const double a = 1.25, b = -0.75;
        for (int n = -8; n <= 8; ++n) comb.set_coeff(n, a * f.coeff(n) + b * g.coeff(n));
        CHECK(std::abs(pairing(comb, psi) - (a * pairing(f, psi) + b * pairing(g, psi))) < 1e-12);
    }
    SECTION("matches physical-grid quadrature") {
        const SpectralField f = random_hermitian(grid, 9);
        const std::vector<double> uf = to_physical(f);
        const std::vector<double> up = to_physical(dirichlet_project(psi, 8));
        long double acc = 0.0L;
        for (std::size_t j = 0; j < uf.size(); ++j) acc += uf[j] * up[j];
        const double quad = static_cast<double>(acc) / static_cast<double>(uf.size());
        CHECK(std::abs(pairing(f, psi) - quad) < 1e-10);
    }
}

TEST_CASE("norms", "[spectral]") {
    const GridSpec grid = GridSpec::with_mode_bound(8);

    SECTION("zero field") {
        CHECK(h_norm(SpectralField(grid), 1.0) == 0.0);
        CHECK(winf_norm(SpectralField(grid), 0.0) == 0.0);
    }
    SECTION("e_1 + e_{-1} at s = 1 has norm 2") {
        SpectralField f(grid);
        f.set_mode_pair(1, cd(1.0, 0.0));
        CHECK(std::abs(h_norm(f, 1.0) - 2.0) < 1e-14);
    }
    SECTION("Plancherel against the physical grid") {
        const SpectralField f = random_hermitian(grid, 21);
        const std::vector<double> u = to_physical(f);
        long double acc = 0.0L;
        for (double v : u) acc += static_cast<long double>(v) * v;
        const double mean_sq = static_cast<double>(acc) / static_cast<double>(u.size());
        CHECK(std::abs(h_norm(f, 0.0) * h_norm(f, 0.0) - mean_sq) < 1e-10);
    }
    SECTION("sup norm of cos x") {
        SpectralField f(grid);
        f.set_mode_pair(1, cd(0.5, 0.0));
        CHECK(std::abs(winf_norm(f, 0.0, 4) - 1.0) < 1e-6);
    }
    SECTION("sup-norm estimate nondecreasing in oversample") {
        const SpectralField f = random_hermitian(grid, 23);
        double prev = 0.0;
        for (int ov : {2, 4, 8, 16}) {
            const double v = winf_norm(f, 0.3, ov);
            CHECK(v >= prev - 1e-14);
            prev = v;
        }
    }
}

TEST_CASE("physical transforms", "[spectral]") {
    SECTION("constant field") {
        const GridSpec grid = GridSpec::with_mode_bound(6);
        std::vector<double> u(static_cast<std::size_t>(grid.physical_points), 1.0);
        const SpectralField f = from_physical(grid, u);
        CHECK(std::abs(f.coeff(0) - cd(1.0, 0.0)) < 1e-13);
        for (int n = 1; n <= 6; ++n) CHECK(std::abs(f.coeff(n)) < 1e-13);
    }
    SECTION("cosine samples analyze to half weights") {
        const GridSpec grid = GridSpec::with_mode_bound(6);
        std::vector<double> u(static_cast<std::size_t>(grid.physical_points));
        for (int j = 0; j < grid.physical_points; ++j)
            u[static_cast<std::size_t>(j)] = std::cos(2.0 * kPi * j / grid.physical_points);
        const SpectralField f = from_physical(grid, u);
        CHECK(std::abs(f.coeff(1) - cd(0.5, 0.0)) < 1e-13);
        CHECK(std::abs(f.coeff(-1) - cd(0.5, 0.0)) < 1e-13);
    }
    SECTION("round trip, power-of-two grid") {
        const GridSpec grid = GridSpec::with_mode_bound(16);
        const SpectralField f = random_hermitian(grid, 31);
        const SpectralField g = from_physical(grid, to_physical(f));
        for (int n = -16; n <= 16; ++n) CHECK(std::abs(g.coeff(n) - f.coeff(n)) < 1e-12);
    }
    SECTION("round trip, odd grid size") {
        const GridSpec grid(16, 2 * 16 + 3);
        const SpectralField f = random_hermitian(grid, 33);
        const SpectralField g = from_physical(grid, to_physical(f));
        for (int n = -16; n <= 16; ++n) CHECK(std::abs(g.coeff(n) - f.coeff(n)) < 1e-10);
    }
    SECTION("length mismatch throws") {
        const GridSpec grid = GridSpec::with_mode_bound(6);
        CHECK_THROWS_AS(from_physical(grid, std::vector<double>(3, 0.0)), std::invalid_argument);
    }
}

TEST_CASE("hermitian closure of operations", "[spectral]") {
    const GridSpec grid = GridSpec::with_mode_bound(12);
    for (std::uint64_t k = 0; k < 8; ++k) {
        const SpectralField f = random_hermitian(grid, 300 + k);
        const SpectralField g = random_hermitian(grid, 400 + k);
        CHECK(f.hermitian_defect() == 0.0);
        CHECK(semigroup_apply(f, 1.3).hermitian_defect() < 1e-16);
        CHECK(dirichlet_project(f, 5, true).hermitian_defect() == 0.0);
        CHECK(quadratic_product(f, g).hermitian_defect() == 0.0);
        CHECK(from_physical(grid, to_physical(f)).hermitian_defect() == 0.0);
        // physical trace is real by construction
        for (double v : to_physical(f)) CHECK(std::isfinite(v));
    }
}

TEST_CASE("grid and trajectory validation", "[spectral]") {
    CHECK_THROWS_AS(GridSpec(0, 10), std::invalid_argument);
    CHECK_THROWS_AS(GridSpec(4, 9), std::invalid_argument);  // needs >= 2M+2
    Trajectory t;
    t.times = {0.0, 1.0, 1.0};
    t.states = {SpectralField(GridSpec::with_mode_bound(2)),
                SpectralField(GridSpec::with_mode_bound(2)),
                SpectralField(GridSpec::with_mode_bound(2))};
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
    t.times = {0.0, 0.5, 1.0};
    CHECK_NOTHROW(t.validate());
}

TEST_CASE("mode-row serialization round trip", "[spectral]") {
    const GridSpec grid = GridSpec::with_mode_bound(5);
    const SpectralField f = random_hermitian(grid, 77);
    const SpectralField g = field_from_mode_rows(grid, field_mode_rows(f));
    for (int n = -5; n <= 5; ++n) CHECK(g.coeff(n) == f.coeff(n));
}

TEST_CASE("trajectory export round trips", "[spectral]") {
    const GridSpec grid = GridSpec::with_mode_bound(4);
    Trajectory t;
    for (int k = 0; k < 3; ++k) {
        t.times.push_back(0.5 * k);
        t.states.push_back(random_hermitian(grid, 500 + static_cast<std::uint64_t>(k)));
    }
    std::stringstream bin(std::ios::in | std::ios::out | std::ios::binary);
    trajectory_write_binary(bin, t);
    const Trajectory back = trajectory_read_binary(bin);
    REQUIRE(back.times.size() == t.times.size());
    for (std::size_t j = 0; j < t.times.size(); ++j) {
        CHECK(back.times[j] == t.times[j]);
        for (int n = -4; n <= 4; ++n) CHECK(back.states[j].coeff(n) == t.states[j].coeff(n));
    }
    std::ostringstream csv;
    trajectory_write_csv(csv, t);
    CHECK(csv.str().rfind("t,n,re,im\n", 0) == 0);
}
