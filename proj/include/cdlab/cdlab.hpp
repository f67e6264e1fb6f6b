// Copyright (c) 2026 cdlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cdlab/averaging.hpp"
#include "cdlab/checkpoint_io.hpp"
#include "cdlab/cli.hpp"
#include "cdlab/compute.hpp"
#include "cdlab/config.hpp"
#include "cdlab/csv.hpp"
#include "cdlab/errors.hpp"
#include "cdlab/lawfit.hpp"
#include "cdlab/manifest.hpp"
#include "cdlab/optim.hpp"
#include "cdlab/rng.hpp"
#include "cdlab/schedule.hpp"
#include "cdlab/tasks.hpp"
#include "cdlab/trainer.hpp"
