"""Renders the shallow-water FORTRAN 77 corpus for a given configuration.

The four files (main program plus the dyn/shapiro/update kernels) are the
compiler's primary test input.  Grid dimensions and physics constants are
baked in as PARAMETER statements and literal assignments, so the renderer is
the single source of truth tying experiment configs to corpus text.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict

from .config import ModelParams


def _lit(x: float) -> str:
    return repr(float(x))


def _common_decls(p: ModelParams, with_nt: bool) -> str:
    nt_line = f"      parameter (nt = {p.nt})\n" if with_nt else ""
    return (
        f"      parameter (nx = {p.nx}, ny = {p.ny})\n"
        f"{nt_line}"
        "      real eta, u, v, un, vn, etan\n"
        "      real h, h0\n"
        "      logical wet\n"
        "      common /flow/ eta(0:ny+1,0:nx+1), u(0:ny+1,0:nx+1),\n"
        "     +  v(0:ny+1,0:nx+1), un(0:ny+1,0:nx+1), vn(0:ny+1,0:nx+1),\n"
        "     +  etan(0:ny+1,0:nx+1)\n"
        "      common /depth/ h(0:ny+1,0:nx+1), h0(0:ny+1,0:nx+1),\n"
        "     +  wet(0:ny+1,0:nx+1)\n"
        "      common /consts/ dt, dx, dy, g, eps, hmin\n"
    )


def render_main(p: ModelParams) -> str:
    j1, j2, k1, k2 = p.pulse_box()
    return (
        "c     2d shallow-water basin: forward-euler dynamics, shapiro\n"
        "c     filter, state update.  closed boundaries, single precision.\n"
        "      program main\n"
        + _common_decls(p, with_nt=True) +
        f"      dt = {_lit(p.dt)}\n"
        f"      dx = {_lit(p.dx)}\n"
        f"      dy = {_lit(p.dy)}\n"
        f"      g = {_lit(p.g)}\n"
        f"      eps = {_lit(p.eps)}\n"
        f"      hmin = {_lit(p.hmin)}\n"
        "c     flat basin at rest with a centred square pulse; the ghost\n"
        "c     ring is dry land, closing the boundary for the filter too\n"
        "      do 10 j = 0, ny+1\n"
        "        do 20 k = 0, nx+1\n"
        "          if (j .ge. 1 .and. j .le. ny .and.\n"
        "     +        k .ge. 1 .and. k .le. nx) then\n"
        f"            h0(j,k) = {_lit(p.depth)}\n"
        "          else\n"
        "            h0(j,k) = 0.0\n"
        "          end if\n"
        "          eta(j,k) = 0.0\n"
        f"          if (j .ge. {j1} .and. j .le. {j2} .and.\n"
        f"     +        k .ge. {k1} .and. k .le. {k2}) then\n"
        f"            eta(j,k) = {_lit(p.pulse_height)}\n"
        "          end if\n"
        "          etan(j,k) = eta(j,k)\n"
        "          h(j,k) = h0(j,k) + eta(j,k)\n"
        "          wet(j,k) = h(j,k) .gt. hmin\n"
        "          u(j,k) = 0.0\n"
        "          un(j,k) = 0.0\n"
        "          v(j,k) = 0.0\n"
        "          vn(j,k) = 0.0\n"
        "20      continue\n"
        "10    continue\n"
        "c     time integration\n"
        "      do 100 n = 1, nt\n"
        "        call dyn\n"
        "        call shapiro\n"
        "        call update\n"
        "100   continue\n"
        "c     interior checksums of the final fields\n"
        "      seta = 0.0\n"
        "      su = 0.0\n"
        "      sv = 0.0\n"
        "      sh = 0.0\n"
        "      do 200 j = 1, ny\n"
        "        do 200 k = 1, nx\n"
        "          seta = seta + eta(j,k)\n"
        "          su = su + u(j,k)\n"
        "          sv = sv + v(j,k)\n"
        "          sh = sh + h(j,k)\n"
        "200   continue\n"
        "      end\n"
    )


def render_dyn(p: ModelParams) -> str:
    return (
        "c     dynamics kernel: momentum under surface gradients and\n"
        "c     upwind flux-form continuity on the interior cells\n"
        "      subroutine dyn\n"
        + _common_decls(p, with_nt=False) +
        "      do 10 j = 0, ny+1\n"
        "        do 20 k = 0, nx+1\n"
        "          if (j .ge. 1 .and. j .le. ny .and.\n"
        "     +        k .ge. 1 .and. k .le. nx) then\n"
        "            ue = u(j,k) - dt*g*(eta(j,k+1) - eta(j,k))/dx\n"
        "            uw = u(j,k-1) - dt*g*(eta(j,k) - eta(j,k-1))/dx\n"
        "            vno = v(j,k) - dt*g*(eta(j+1,k) - eta(j,k))/dy\n"
        "            vso = v(j-1,k) - dt*g*(eta(j,k) - eta(j-1,k))/dy\n"
        "            if (k .eq. nx) ue = 0.0\n"
        "            if (k .eq. 1) uw = 0.0\n"
        "            if (j .eq. ny) vno = 0.0\n"
        "            if (j .eq. 1) vso = 0.0\n"
        "            if (ue .gt. 0.0) then\n"
        "              uhe = ue*h(j,k)\n"
        "            else\n"
        "              uhe = ue*h(j,k+1)\n"
        "            end if\n"
        "            if (uw .gt. 0.0) then\n"
        "              uhw = uw*h(j,k-1)\n"
        "            else\n"
        "              uhw = uw*h(j,k)\n"
        "            end if\n"
        "            if (vno .gt. 0.0) then\n"
        "              vhn = vno*h(j,k)\n"
        "            else\n"
        "              vhn = vno*h(j+1,k)\n"
        "            end if\n"
        "            if (vso .gt. 0.0) then\n"
        "              vhs = vso*h(j-1,k)\n"
        "            else\n"
        "              vhs = vso*h(j,k)\n"
        "            end if\n"
        "            un(j,k) = ue\n"
        "            vn(j,k) = vno\n"
        "            etan(j,k) = eta(j,k) - dt*((uhe - uhw) + (vhn - vhs))/dx\n"
        "          else\n"
        "            un(j,k) = u(j,k)\n"
        "            vn(j,k) = v(j,k)\n"
        "            etan(j,k) = eta(j,k)\n"
        "          end if\n"
        "20      continue\n"
        "10    continue\n"
        "      return\n"
        "      end\n"
    )


def render_shapiro(p: ModelParams) -> str:
    return (
        "c     first-order shapiro filter on the updated surface; dry\n"
        "c     neighbours contribute the centre value instead\n"
        "      subroutine shapiro\n"
        + _common_decls(p, with_nt=False) +
        "      do 10 j = 0, ny+1\n"
        "        do 20 k = 0, nx+1\n"
        "          if (j .ge. 1 .and. j .le. ny .and.\n"
        "     +        k .ge. 1 .and. k .le. nx) then\n"
        "            if (wet(j,k+1)) then\n"
        "              e1 = etan(j,k+1)\n"
        "            else\n"
        "              e1 = etan(j,k)\n"
        "            end if\n"
        "            if (wet(j,k-1)) then\n"
        "              e2 = etan(j,k-1)\n"
        "            else\n"
        "              e2 = etan(j,k)\n"
        "            end if\n"
        "            if (wet(j+1,k)) then\n"
        "              e3 = etan(j+1,k)\n"
        "            else\n"
        "              e3 = etan(j,k)\n"
        "            end if\n"
        "            if (wet(j-1,k)) then\n"
        "              e4 = etan(j-1,k)\n"
        "            else\n"
        "              e4 = etan(j,k)\n"
        "            end if\n"
        "            eta(j,k) = (1.0 - eps)*etan(j,k)\n"
        "     +        + 0.25*eps*((e1 + e2) + (e3 + e4))\n"
        "          else\n"
        "            eta(j,k) = etan(j,k)\n"
        "          end if\n"
        "20      continue\n"
        "10    continue\n"
        "      return\n"
        "      end\n"
    )


def render_update(p: ModelParams) -> str:
    return (
        "c     state update: total depth, wet mask and velocities; dry\n"
        "c     cells are clamped to zero velocity\n"
        "      subroutine update\n"
        + _common_decls(p, with_nt=False) +
        "      do 10 j = 0, ny+1\n"
        "        do 20 k = 0, nx+1\n"
        "          hnew = h0(j,k) + eta(j,k)\n"
        "          unew = un(j,k)\n"
        "          vnew = vn(j,k)\n"
        "          if (hnew .le. hmin) then\n"
        "            unew = 0.0\n"
        "            vnew = 0.0\n"
        "          end if\n"
        "          h(j,k) = hnew\n"
        "          wet(j,k) = hnew .gt. hmin\n"
        "          u(j,k) = unew\n"
        "          v(j,k) = vnew\n"
        "20      continue\n"
        "10    continue\n"
        "      return\n"
        "      end\n"
    )


def render_corpus(p: ModelParams) -> Dict[str, str]:
    """File name -> fixed-form source text for the whole corpus."""
    return {
        "main.f": render_main(p),
        "dyn.f": render_dyn(p),
        "shapiro.f": render_shapiro(p),
        "update.f": render_update(p),
    }


CORPUS_ORDER = ("main.f", "dyn.f", "shapiro.f", "update.f")


def write_corpus(p: ModelParams, outdir) -> list:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in render_corpus(p).items():
        path = outdir / name
        path.write_text(text)
        written.append(path)
    return written


def parse_corpus(p: ModelParams):
    """Parse the rendered corpus and link it into a ProgramAst."""
    from ..frontend import link_units, parse_source

    units = []
    for name, text in render_corpus(p).items():
        units.extend(parse_source(text, name))
    return link_units(units)


def repo_corpus_dir() -> Path:
    """Committed corpus location (repository checkout only)."""
    return Path(__file__).resolve().parents[3] / "corpus" / "sw2d"
