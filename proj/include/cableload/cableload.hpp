#pragma once

#include "cableload/controller.hpp"
#include "cableload/diagnostics.hpp"
#include "cableload/dynamics.hpp"
#include "cableload/errors.hpp"
#include "cableload/integrator.hpp"
#include "cableload/linalg.hpp"
#include "cableload/linearization.hpp"
#include "cableload/manifold.hpp"
#include "cableload/model.hpp"
#include "cableload/oracle.hpp"
#include "cableload/presets.hpp"
#include "cableload/random.hpp"
#include "cableload/scenario.hpp"
#include "cableload/simulation.hpp"
#include "cableload/trajectory.hpp"
#include "cableload/verify.hpp"
