#pragma once

#include "gridlight/advantage.hpp"
#include "gridlight/common.hpp"
#include "gridlight/config.hpp"
#include "gridlight/controllers.hpp"
#include "gridlight/env.hpp"
#include "gridlight/flows.hpp"
#include "gridlight/mdp.hpp"
#include "gridlight/netmodel.hpp"
#include "gridlight/netmodel_io.hpp"
#include "gridlight/simcore.hpp"
#include "gridlight/tinynn.hpp"
#include "gridlight/trainer.hpp"
