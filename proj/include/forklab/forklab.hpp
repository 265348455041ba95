#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The forklab authors

/**
 * @file forklab.hpp
 * @brief Umbrella header: the full tabular policy-gradient laboratory.
 */

#include <forklab/config.hpp>
#include <forklab/credit.hpp>
#include <forklab/env.hpp>
#include <forklab/errors.hpp>
#include <forklab/evaluation.hpp>
#include <forklab/infotheory.hpp>
#include <forklab/io.hpp>
#include <forklab/logio.hpp>
#include <forklab/objective.hpp>
#include <forklab/policy.hpp>
#include <forklab/report.hpp>
#include <forklab/rng.hpp>
#include <forklab/trainer.hpp>
#include <forklab/version.hpp>
