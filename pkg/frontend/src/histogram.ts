import type { Histogram } from './api.js'

const CLASS_COLORS = ['#d62728', '#1f77b4', '#2ca02c', '#9467bd']

// Renders the per-class posterior histograms as bar columns sharing one
// [0, 1] probability axis. Bars are plain divs so tests can assert heights.
export function renderHistogram(hist: Histogram, height = 60): HTMLDivElement {
    const root = document.createElement('div')
    root.className = 'histogram'
    const total = hist.counts.length ? hist.counts[0].reduce((a, b) => a + b, 0) : 0
    for (let cls = 0; cls < hist.counts.length; cls++) {
        const row = document.createElement('div')
        row.className = 'histogram-row'
        row.dataset.class = String(cls)
        row.style.display = 'flex'
        row.style.alignItems = 'flex-end'
        row.style.height = `${height}px`
        for (let b = 0; b < hist.counts[cls].length; b++) {
            const count = hist.counts[cls][b]
            const bar = document.createElement('div')
            bar.className = 'histogram-bar'
            bar.dataset.count = String(count)
            bar.style.flex = '1'
            bar.style.margin = '0 1px'
            bar.style.background = CLASS_COLORS[cls % CLASS_COLORS.length]
            bar.style.height = total > 0
                ? `${Math.round(100 * count / total)}%`
                : '0%'
            bar.title = `class ${cls}, p in [${hist.edges[b].toFixed(1)}, ` +
                `${hist.edges[b + 1].toFixed(1)}): ${count}`
            row.appendChild(bar)
        }
        const tag = document.createElement('span')
        tag.className = 'histogram-label'
        tag.textContent = `class ${cls}`
        tag.style.fontSize = '10px'
        tag.style.marginLeft = '4px'
        row.appendChild(tag)
        root.appendChild(row)
    }
    return root
}
