#pragma once

#include "collabnet/csv.hpp"
#include "collabnet/episode.hpp"
#include "collabnet/money.hpp"
#include "collabnet/oracle.hpp"
#include "collabnet/pareto.hpp"
#include "collabnet/policies.hpp"
#include "collabnet/profiles.hpp"
#include "collabnet/qtable.hpp"
#include "collabnet/rng.hpp"
#include "collabnet/runner.hpp"
#include "collabnet/scenario.hpp"
#include "collabnet/session.hpp"
#include "collabnet/swarm.hpp"
