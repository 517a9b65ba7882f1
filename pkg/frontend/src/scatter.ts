import type { QueueItem } from './api.js'

// 2-D feature payloads draw as a point over the rest of the pending queue
// (grey context); higher-dimensional payloads fall back to a numeric strip.
export function renderSample(item: QueueItem, context: QueueItem[],
    size = 120): HTMLElement {
    if (item.payload.length !== 2) {
        const strip = document.createElement('code')
        strip.className = 'payload-strip'
        strip.textContent = item.payload.map(v => v.toFixed(2)).join(', ')
        return strip
    }
    const canvas = document.createElement('canvas')
    canvas.className = 'payload-scatter'
    canvas.width = size
    canvas.height = size
    let ctx: CanvasRenderingContext2D | null = null
    try {
        ctx = canvas.getContext('2d')
    } catch {
        ctx = null  // headless DOM without canvas support
    }
    if (!ctx) return canvas

    const points = context.filter(c => c.payload.length === 2)
    const xs = points.map(p => p.payload[0]).concat([item.payload[0]])
    const ys = points.map(p => p.payload[1]).concat([item.payload[1]])
    const pad = 0.5
    const lo = [Math.min(...xs) - pad, Math.min(...ys) - pad]
    const hi = [Math.max(...xs) + pad, Math.max(...ys) + pad]
    const px = (v: number, axis: 0 | 1) =>
        ((v - lo[axis]) / (hi[axis] - lo[axis])) * (size - 8) + 4

    ctx.fillStyle = '#ffffff'
    ctx.fillRect(0, 0, size, size)
    ctx.fillStyle = '#bbbbbb'
    for (const p of points) {
        ctx.beginPath()
        ctx.arc(px(p.payload[0], 0), size - px(p.payload[1], 1), 2, 0, 2 * Math.PI)
        ctx.fill()
    }
    ctx.fillStyle = '#d62728'
    ctx.beginPath()
    ctx.arc(px(item.payload[0], 0), size - px(item.payload[1], 1), 4, 0, 2 * Math.PI)
    ctx.fill()
    return canvas
}
