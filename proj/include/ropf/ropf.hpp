#pragma once

#include "ropf/costmodel.hpp"
#include "ropf/dispatch.hpp"
#include "ropf/netmodel.hpp"
#include "ropf/powerflow.hpp"
#include "ropf/pso.hpp"
#include "ropf/report.hpp"
