/** DOM wiring for the gallery.
 *
 * mountGallery builds the static skeleton once and re-renders it from
 * the view model on every change. The progress section draws whatever
 * get_state served: a mean curve with a band and an incumbent marker
 * in 1D, a mean heatmap with a marked cell in 2D. The marker carries
 * the incumbent location in a data attribute so scripted sessions can
 * check it against the service without scraping pixels.
 */

import { ServiceClient, isCurve1d, type PosteriorCurve1d, type PosteriorGrid2d } from "./api.js";
import { renderSwatch } from "./renderSpec.js";
import { GalleryViewModel, type ViewModelOptions } from "./viewModel.js";

export interface Gallery {
  vm: GalleryViewModel;
  root: HTMLElement;
  /** Promise of the most recent user action, for scripted sessions. */
  lastAction: Promise<void>;
}

const VIZ_W = 300;
const VIZ_H = 120;

function svgEl(tag: string): Element {
  return document.createElementNS("http://www.w3.org/2000/svg", tag);
}

function scale(value: number, lo: number, hi: number, size: number): number {
  if (hi <= lo) return size / 2;
  return ((value - lo) / (hi - lo)) * size;
}

function drawCurve(
  viz: HTMLElement,
  curve: PosteriorCurve1d,
  bounds: number[][],
  incumbent: number[] | null,
): void {
  const domain = bounds[0] ?? [0, 1];
  const lo = domain[0] ?? 0;
  const hi = domain[1] ?? 1;
  const upper = curve.mean.map((m, i) => m + (curve.std[i] ?? 0));
  const lower = curve.mean.map((m, i) => m - (curve.std[i] ?? 0));
  const yMin = Math.min(...lower);
  const yMax = Math.max(...upper);
  const px = (x: number) => scale(x, lo, hi, VIZ_W);
  const py = (y: number) => VIZ_H - scale(y, yMin, yMax, VIZ_H);

  const svg = svgEl("svg");
  svg.setAttribute("viewBox", `0 0 ${VIZ_W} ${VIZ_H}`);
  svg.setAttribute("class", "posterior-curve");

  const band = svgEl("polygon");
  const forward = curve.x.map((x, i) => `${px(x)},${py(upper[i] ?? 0)}`);
  const back = [...curve.x].reverse().map((x, i) => {
    const j = curve.x.length - 1 - i;
    return `${px(x)},${py(lower[j] ?? 0)}`;
  });
  band.setAttribute("points", [...forward, ...back].join(" "));
  band.setAttribute("class", "sigma-band");
  band.setAttribute("fill", "#7aa7d655");
  svg.appendChild(band);

  const meanLine = svgEl("polyline");
  meanLine.setAttribute(
    "points",
    curve.x.map((x, i) => `${px(x)},${py(curve.mean[i] ?? 0)}`).join(" "),
  );
  meanLine.setAttribute("fill", "none");
  meanLine.setAttribute("stroke", "#27567f");
  meanLine.setAttribute("stroke-width", "2");
  svg.appendChild(meanLine);

  if (incumbent && incumbent.length > 0) {
    const marker = svgEl("circle");
    marker.setAttribute("cx", String(px(incumbent[0] ?? 0)));
    marker.setAttribute("cy", String(VIZ_H / 2));
    marker.setAttribute("r", "5");
    marker.setAttribute("fill", "#c2442d");
    marker.setAttribute("class", "incumbent-marker");
    marker.setAttribute("data-location", JSON.stringify(incumbent));
    svg.appendChild(marker);
  }
  viz.replaceChildren(svg);
}

function drawHeatmap(
  viz: HTMLElement,
  grid: PosteriorGrid2d,
  incumbent: number[] | null,
): void {
  const flat = grid.mean.flat();
  const lo = Math.min(...flat);
  const hi = Math.max(...flat);
  const span = hi - lo || 1;

  // nearest grid cell to the incumbent gets the marker
  let markRow = -1;
  let markCol = -1;
  if (incumbent && incumbent.length >= 2) {
    markRow = nearestIndex(grid.x1, incumbent[0] ?? 0);
    markCol = nearestIndex(grid.x2, incumbent[1] ?? 0);
  }

  const table = document.createElement("div");
  table.className = "heatmap";
  table.style.display = "grid";
  table.style.gridTemplateColumns = `repeat(${grid.x2.length}, 6px)`;
  grid.mean.forEach((row, i) => {
    row.forEach((value, j) => {
      const cell = document.createElement("div");
      const lightness = 20 + (60 * (value - lo)) / span;
      cell.style.background = `hsl(220, 60%, ${lightness}%)`;
      cell.style.height = "6px";
      if (i === markRow && j === markCol) {
        cell.className = "incumbent-marker";
        cell.style.outline = "2px solid #c2442d";
        cell.dataset.location = JSON.stringify(incumbent);
      }
      table.appendChild(cell);
    });
  });
  viz.replaceChildren(table);
}

function nearestIndex(axis: number[], value: number): number {
  let best = 0;
  let bestDist = Infinity;
  axis.forEach((x, i) => {
    const d = Math.abs(x - value);
    if (d < bestDist) {
      bestDist = d;
      best = i;
    }
  });
  return best;
}

export function mountGallery(
  root: HTMLElement,
  client: ServiceClient,
  options: ViewModelOptions = {},
): Gallery {
  root.innerHTML = `
    <div class="banner" hidden>
      <span class="banner-text"></span>
      <button class="retry" type="button">retry</button>
    </div>
    <div class="counter">preferences recorded: <span class="iteration">0</span></div>
    <div class="pair">
      <button class="choice" type="button" data-side="0"></button>
      <button class="choice" type="button" data-side="1"></button>
    </div>
    <div class="progress">
      <div class="placeholder">no preferences yet</div>
      <div class="viz"></div>
      <ol class="history"></ol>
    </div>`;

  const vm = new GalleryViewModel(client, options);
  const gallery: Gallery = { vm, root, lastAction: Promise.resolve() };

  const banner = root.querySelector<HTMLElement>(".banner")!;
  const bannerText = root.querySelector<HTMLElement>(".banner-text")!;
  const iteration = root.querySelector<HTMLElement>(".iteration")!;
  const choices = Array.from(root.querySelectorAll<HTMLButtonElement>(".choice"));
  const placeholder = root.querySelector<HTMLElement>(".placeholder")!;
  const viz = root.querySelector<HTMLElement>(".viz")!;
  const historyList = root.querySelector<HTMLElement>(".history")!;

  function render(): void {
    banner.hidden = vm.banner === null;
    bannerText.textContent = vm.banner ?? "";
    iteration.textContent = String(vm.iteration);

    choices.forEach((button, side) => {
      const spec = vm.pair?.renders[side];
      button.innerHTML = spec ? renderSwatch(spec) : "";
      button.disabled = !vm.pair || vm.busy || vm.hasPendingSubmission;
    });

    const location = vm.incumbent?.location ?? null;
    if (vm.incumbent === null || vm.posteriorCurve === null) {
      placeholder.hidden = false;
      viz.replaceChildren();
    } else {
      placeholder.hidden = true;
      if (isCurve1d(vm.posteriorCurve)) {
        drawCurve(viz, vm.posteriorCurve, vm.bounds, location);
      } else {
        drawHeatmap(viz, vm.posteriorCurve, location);
      }
    }

    historyList.replaceChildren(
      ...vm.history.map((click, index) => {
        const item = document.createElement("li");
        item.textContent = `round ${index + 1}: chose ${click.winnerIndex === 0 ? "left" : "right"}`;
        return item;
      }),
    );
  }

  vm.onChange = render;
  choices.forEach((button, side) => {
    button.addEventListener("click", () => {
      gallery.lastAction = vm.choose(side as 0 | 1);
    });
  });
  root.querySelector<HTMLButtonElement>(".retry")!.addEventListener("click", () => {
    // a failed post keeps its token; anything else just refetches
    gallery.lastAction = vm.hasPendingSubmission ? vm.retry() : vm.refreshPair();
  });

  render();
  return gallery;
}
