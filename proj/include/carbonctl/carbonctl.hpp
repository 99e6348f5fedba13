#pragma once

#include "carbonctl/experiments.hpp"
#include "carbonctl/fixtures.hpp"
#include "carbonctl/fleet.hpp"
#include "carbonctl/metrics.hpp"
#include "carbonctl/policy.hpp"
#include "carbonctl/provider.hpp"
#include "carbonctl/sim.hpp"
#include "carbonctl/sim_config.hpp"
#include "carbonctl/synth.hpp"
#include "carbonctl/time.hpp"
#include "carbonctl/traces.hpp"
