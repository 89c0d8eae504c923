/*
 * Copyright 2026 The survfuse Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#ifndef SURVFUSE_SURVFUSE_H_
#define SURVFUSE_SURVFUSE_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SF_API __declspec(dllexport)
#else
#define SF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Values are stable. */
typedef enum sf_status {
  SF_OK = 0,
  SF_E_ARGUMENT = 1,
  SF_E_VALIDATION = 2,
  SF_E_NUMERIC = 3,
  SF_E_SINGULAR = 4,
  SF_E_POSITIVITY = 5,
  SF_E_NOT_IDENTIFIED = 6,
  SF_E_FIT = 7,
  SF_E_RANGE = 8,
  SF_E_EMPTY_SOURCE = 9,
  SF_E_INSUFFICIENT_DATA = 10,
  SF_E_IO = 11,
  SF_E_REPORT_INVALID = 12,
  SF_E_INTERNAL = 13
} sf_status;

typedef struct sf_sample sf_sample;
typedef struct sf_report sf_report;

/* Message of the last failure on the calling thread ("" if none). */
SF_API const char* sf_last_error(void);
SF_API const char* sf_status_name(sf_status status);
SF_API const char* sf_version(void);

/* Samples. pi: design value, or NaN for the empirical n1/n. */
SF_API sf_status sf_sample_read_csv(const char* path, double pi, sf_sample** out);
SF_API sf_status sf_sample_parse_csv(const char* text, double pi, sf_sample** out);
SF_API sf_status sf_sample_generate(const char* dgp_id, size_t n, uint64_t seed, sf_sample** out);
SF_API sf_status sf_sample_write_csv(const sf_sample* sample, const char* path);
SF_API size_t sf_sample_size(const sf_sample* sample);
SF_API size_t sf_sample_n1(const sf_sample* sample);
SF_API double sf_sample_pi(const sf_sample* sample);
SF_API void sf_sample_free(sf_sample* sample);

/*
 * Estimation. options_json is an object with keys
 *   t_star (number or array), estimators (array of cs|rc|dr|eff|shift0|shift1|all),
 *   nuisance ("fit" | "oracle:<dgp>" | "misspec-event:<dgp>" | "misspec-gR:<dgp>"),
 *   alpha, seed, threads, pi, trim, grid_points, subsamples,
 *   event_family, censoring_family.
 * Unknown keys are rejected. With "all", a failing component is reported in
 * place; an explicitly requested estimator that fails fails the call.
 */
SF_API sf_status sf_estimate(const sf_sample* sample, const char* options_json, sf_report** out);

/* Simulation and rate study; config_json mirrors the simulation config. */
SF_API sf_status sf_simulate(const char* config_json, sf_report** out);
SF_API sf_status sf_rates(const char* config_json, sf_report** out);

/* Report accessors. Strings stay owned by the report. */
SF_API const char* sf_report_json(const sf_report* report);
/* CSV table (simulation cells or rate fits); "" for estimation reports. */
SF_API const char* sf_report_csv(const sf_report* report);
/* 1 if every cell respected the failure cap (always 1 for estimation). */
SF_API int sf_report_valid(const sf_report* report);
/* Flat list of estimates (estimation reports only). */
SF_API size_t sf_report_count(const sf_report* report);
SF_API sf_status sf_report_estimate(const sf_report* report, size_t i, double* t_star, double* point, double* se,
                                    double* lower, double* upper);
SF_API const char* sf_report_estimator(const sf_report* report, size_t i);
SF_API void sf_report_free(sf_report* report);

/*
 * Solver table for one covariate value under the oracle nuisances of a DGP:
 * CSV with columns t,h,eta,h_residual,eta_residual. grid_points 0 means 2000.
 * The returned string must be released with sf_string_free.
 */
SF_API sf_status sf_solve_table(const char* dgp_id, const double* w, size_t dim, double pi, double t_star,
                                size_t grid_points, char** csv_out);
SF_API void sf_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* SURVFUSE_SURVFUSE_H_ */
