#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "semires/factorization.hpp"
#include "semires/norms.hpp"

namespace semires {

struct NeumannDivergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NeumannResult {
    cvector value;
    int terms = 0;
    double last_ratio = 0.0;
};

// R_W(lambda) v = sum_k (lambda - E)^k R_W(E)^{k+1} v, truncated once the
// geometric tail bound drops below tol. Term growth signals lambda outside the
// guaranteed disk.
inline NeumannResult neumann_resolvent(const Factorization& fact_at_E, cdouble lambda,
                                       const cvector& v, double tol = 1e-10,
                                       int max_terms = 200) {
    const cdouble mu = lambda - fact_at_E.lambda();  // lambda - E
    cvector term = fact_at_E.solve(v);
    cvector sum = term;
    NeumannResult res;
    res.terms = 1;
    if (mu == cdouble{0.0, 0.0}) {  // lambda = E: the direct solve
        res.value = std::move(sum);
        return res;
    }
    double prev_norm = vec_norm(term);
    const double sum_scale = std::max(vec_norm(sum), 1e-300);
    int growth_streak = 0;
    for (int k = 1; k < max_terms; ++k) {
        term = fact_at_E.solve(term);
        for (auto& z : term) z *= mu;
        const double tn = vec_norm(term);
        res.last_ratio = tn / std::max(prev_norm, 1e-300);
        if (tn >= prev_norm) {
            if (++growth_streak >= 2)
                throw NeumannDivergence(
                    "neumann_resolvent: term norms non-decreasing, lambda outside the "
                    "convergence disk");
        } else {
            growth_streak = 0;
        }
        for (size_t i = 0; i < sum.size(); ++i) sum[i] += term[i];
        res.terms = k + 1;
        prev_norm = tn;
        const double q = std::min(res.last_ratio, 0.999);
        if (tn * q / (1.0 - q) < tol * std::max(vec_norm(sum), sum_scale)) break;
    }
    res.value = std::move(sum);
    return res;
}

struct ContinuedNormSample {
    double h = 0.0;
    double a_h = 0.0;
    double C_trial = 0.0;
    cdouble lambda;
    double norm = 0.0;
    double ratio = 0.0;  // norm / a_h
    bool pole = false;
};

// || chi (P - i W_out - lambda)^{-1} chi || for Im lambda < 0 (the continued
// cutoff resolvent); a factorization failure is a resonance candidate.
inline OutgoingNormResult cap_lower_halfplane_norm(const SupportLayout& lay, double L,
                                                   const PotentialSpec& V, double h,
                                                   cdouble lambda,
                                                   const double tol = 1e-6,
                                                   int max_iter = 500,
                                                   bool stability_check = true) {
    if (lambda.imag() >= 0.0)
        throw std::invalid_argument("cap_lower_halfplane_norm: expects Im lambda < 0");
    return continued_cutoff_norm(lay, L, V, h, lambda, tol, max_iter, stability_check);
}

struct DiskCertificateEntry {
    double h = 0.0;
    double a_h = 0.0;
    double sup_ratio = 0.0;
    bool pole_hit = false;
    bool pass = false;
    std::vector<ContinuedNormSample> samples;
};

struct DiskCertificate {
    double E = 1.0;
    double C_trial = 0.0;          // first passing C from the doubling search
    bool pass = false;
    bool out_of_hypothesis = false;  // a(h) outside the polynomial window
    std::string note;
    std::vector<DiskCertificateEntry> entries;  // for the final C tried
};

namespace detail {

// boundary ring + both diameters + center, per the sampling decision
inline std::vector<cdouble> disk_sample_points(double E, double radius,
                                               int boundary_points = 16,
                                               int diameter_points = 8) {
    std::vector<cdouble> pts;
    pts.emplace_back(E, 0.0);
    for (int k = 0; k < boundary_points; ++k) {
        const double th = 2.0 * M_PI * k / boundary_points;
        pts.emplace_back(E + radius * std::cos(th), radius * std::sin(th));
    }
    for (int k = 1; k <= diameter_points; ++k) {
        const double t = -1.0 + 2.0 * k / (diameter_points + 1.0);
        pts.emplace_back(E + t * radius, 0.0);        // real diameter
        pts.emplace_back(E, t * radius);              // vertical diameter
    }
    return pts;
}

}  // namespace detail

// Disk certificate: find C such that on the sampled disk
// |lambda - E| <= 1/(C a(h)) the continued cutoff-resolvent norm stays below
// C a(h) for every h in the sweep, poles counting as failures.
inline DiskCertificate disk_certificate(const SupportLayout& lay, double L,
                                        const PotentialSpec& V,
                                        const std::vector<double>& h_list, double E,
                                        const std::vector<double>& a_of_h,
                                        double C_start = 1.0, double C_cap = 1024.0,
                                        int boundary_points = 16, double tol = 1e-6,
                                        double max_exponent = 8.0, int max_iter = 2000) {
    if (h_list.size() != a_of_h.size() || h_list.empty())
        throw std::invalid_argument("disk_certificate: h list and a(h) list mismatch");
    if (boundary_points < 16)
        throw std::invalid_argument("disk_certificate: need >= 16 disk samples");
    DiskCertificate cert;
    cert.E = E;

    // hypothesis check: 1 <= a(h) <= h^{-N}
    for (size_t i = 0; i < h_list.size(); ++i) {
        if (a_of_h[i] > std::pow(h_list[i], -max_exponent)) {
            cert.out_of_hypothesis = true;
            cert.note = "a(h) exceeds the polynomial bound h^-N; certificate does not apply";
            return cert;
        }
    }

    for (double C = C_start; C <= C_cap; C *= 2.0) {
        cert.C_trial = C;
        cert.entries.clear();
        bool all_pass = true;
        for (size_t i = 0; i < h_list.size(); ++i) {
            const double h = h_list[i], ah = a_of_h[i];
            const double radius = 1.0 / (C * ah);
            DiskCertificateEntry entry;
            entry.h = h;
            entry.a_h = ah;
            if (radius < 1e-6) {
                cert.out_of_hypothesis = true;
                cert.note = "certificate disk collapses below numerical resolution";
                return cert;
            }
            for (const cdouble lam : detail::disk_sample_points(E, radius, boundary_points)) {
                ContinuedNormSample s;
                s.h = h;
                s.a_h = ah;
                s.C_trial = C;
                s.lambda = lam;
                try {
                    const OutgoingNormResult r = continued_cutoff_norm(
                        lay, L, V, h, lam, tol, max_iter, /*stability_check=*/false);
                    s.norm = r.norm;
                    s.ratio = r.norm / ah;
                } catch (const SingularShift&) {
                    s.pole = true;
                    entry.pole_hit = true;
                }
                entry.sup_ratio = std::max(entry.sup_ratio, s.ratio);
                entry.samples.push_back(s);
            }
            entry.pass = !entry.pole_hit && entry.sup_ratio <= C;
            all_pass = all_pass && entry.pass;
            cert.entries.push_back(std::move(entry));
        }
        if (all_pass) {
            cert.pass = true;
            return cert;
        }
    }
    return cert;  // failed up to C_cap
}

// CSV rows: h,a_h,C_trial,lambda_re,lambda_im,norm,ratio,pole_flag
// plus per-h summary lines: h,sup_ratio,pass
inline void write_certificate_csv(const DiskCertificate& cert, const std::string& path,
                                  const std::string& summary_path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("write_certificate_csv: cannot open " + path);
    std::fprintf(f, "h,a_h,C_trial,lambda_re,lambda_im,norm,ratio,pole_flag\n");
    for (const auto& e : cert.entries)
        for (const auto& s : e.samples)
            std::fprintf(f, "%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%d\n", s.h, s.a_h,
                         s.C_trial, s.lambda.real(), s.lambda.imag(), s.norm, s.ratio,
                         s.pole ? 1 : 0);
    std::fclose(f);
    std::FILE* g = std::fopen(summary_path.c_str(), "w");
    if (!g) throw std::runtime_error("write_certificate_csv: cannot open " + summary_path);
    std::fprintf(g, "h,sup_ratio,pass\n");
    for (const auto& e : cert.entries)
        std::fprintf(g, "%.12g,%.12g,%d\n", e.h, e.sup_ratio, e.pass ? 1 : 0);
    std::fclose(g);
}

}  // namespace semires
