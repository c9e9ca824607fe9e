#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace homogfp {

struct SolveStats {
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
};

// Thomas algorithm for a tridiagonal system; lo[0] and up[n-1] are ignored.
inline void solve_tridiagonal(std::vector<double> lo, std::vector<double> di, std::vector<double> up,
                              std::vector<double> rhs, std::vector<double>& x) {
    const size_t n = di.size();
    x.resize(n);
    for (size_t i = 1; i < n; ++i) {
        const double m = lo[i] / di[i - 1];
        di[i] -= m * up[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    x[n - 1] = rhs[n - 1] / di[n - 1];
    for (size_t i = n - 1; i-- > 0;) x[i] = (rhs[i] - up[i] * x[i + 1]) / di[i];
}

using ApplyFn = std::function<void(const std::vector<double>&, std::vector<double>&)>;

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

inline void remove_mean(std::vector<double>& a) {
    double m = 0.0;
    for (double v : a) m += v;
    m /= static_cast<double>(a.size());
    for (double& v : a) v -= m;
}

// Preconditioned CG. `project` removes the kernel component (zero-mean subspace for
// the singular periodic operators); pass nullptr for nonsingular SPD systems.
// `diag` is an optional Jacobi preconditioner.
inline SolveStats pcg(const ApplyFn& apply, const std::vector<double>& rhs, std::vector<double>& x, double tol,
                      int maxit, const std::vector<double>* diag = nullptr, bool zero_mean = false) {
    const size_t n = rhs.size();
    if (x.size() != n) x.assign(n, 0.0);
    std::vector<double> r(n), z(n), p(n), Ap(n);
    apply(x, Ap);
    for (size_t i = 0; i < n; ++i) r[i] = rhs[i] - Ap[i];
    if (zero_mean) remove_mean(r);
    const double rhs_norm = std::max(norm2(rhs), 1e-300);
    auto precond = [&](const std::vector<double>& in, std::vector<double>& out) {
        if (diag)
            for (size_t i = 0; i < n; ++i) out[i] = in[i] / (*diag)[i];
        else
            out = in;
        if (zero_mean) remove_mean(out);
    };
    precond(r, z);
    p = z;
    double rz = dot(r, z);
    SolveStats st;
    st.residual = norm2(r) / rhs_norm;
    if (st.residual <= tol) {
        st.converged = true;
        return st;
    }
    for (int k = 0; k < maxit; ++k) {
        apply(p, Ap);
        if (zero_mean) remove_mean(Ap);
        const double pAp = dot(p, Ap);
        if (pAp <= 0.0) throw std::runtime_error("pcg: operator not positive definite on the search space");
        const double alpha = rz / pAp;
        for (size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * Ap[i];
        }
        if (zero_mean && (k % 32) == 31) remove_mean(r);  // guard against drift
        st.iterations = k + 1;
        st.residual = norm2(r) / rhs_norm;
        if (st.residual <= tol) {
            st.converged = true;
            break;
        }
        precond(r, z);
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    if (zero_mean) remove_mean(x);
    return st;
}

// BiCGStab with Jacobi preconditioning for the nonsymmetric systems.
inline SolveStats bicgstab(const ApplyFn& apply, const std::vector<double>& rhs, std::vector<double>& x, double tol,
                           int maxit, const std::vector<double>* diag = nullptr) {
    const size_t n = rhs.size();
    if (x.size() != n) x.assign(n, 0.0);
    std::vector<double> r(n), r0(n), p(n, 0.0), v(n, 0.0), s(n), t(n), phat(n), shat(n);
    apply(x, v);
    for (size_t i = 0; i < n; ++i) r[i] = rhs[i] - v[i];
    r0 = r;
    const double rhs_norm = std::max(norm2(rhs), 1e-300);
    double rho = 1.0, alpha = 1.0, omega = 1.0;
    SolveStats st;
    st.residual = norm2(r) / rhs_norm;
    if (st.residual <= tol) {
        st.converged = true;
        return st;
    }
    auto precond = [&](const std::vector<double>& in, std::vector<double>& out) {
        if (diag)
            for (size_t i = 0; i < n; ++i) out[i] = in[i] / (*diag)[i];
        else
            out = in;
    };
    std::fill(v.begin(), v.end(), 0.0);
    for (int k = 0; k < maxit; ++k) {
        const double rho_new = dot(r0, r);
        if (std::abs(rho_new) < 1e-290) break;
        if (k == 0) {
            p = r;
        } else {
            const double beta = (rho_new / rho) * (alpha / omega);
            for (size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        rho = rho_new;
        precond(p, phat);
        apply(phat, v);
        alpha = rho / dot(r0, v);
        for (size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
        if (norm2(s) / rhs_norm <= tol) {
            for (size_t i = 0; i < n; ++i) x[i] += alpha * phat[i];
            st.iterations = k + 1;
            st.residual = norm2(s) / rhs_norm;
            st.converged = true;
            return st;
        }
        precond(s, shat);
        apply(shat, t);
        omega = dot(t, s) / std::max(dot(t, t), 1e-300);
        for (size_t i = 0; i < n; ++i) {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        st.iterations = k + 1;
        st.residual = norm2(r) / rhs_norm;
        if (st.residual <= tol) {
            st.converged = true;
            return st;
        }
        if (std::abs(omega) < 1e-290) break;
    }
    return st;
}

}  // namespace homogfp
