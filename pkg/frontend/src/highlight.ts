import { Span } from "./types";

// Spans arrive as offsets into the plain text; render them as colored marks
// without any client-side re-parsing of annotation sigils.
export function renderHighlighted(text: string, spans: Span[]): DocumentFragment {
  const fragment = document.createDocumentFragment();
  let cursor = 0;
  const ordered = [...spans].sort((a, b) => a.start - b.start);
  for (const span of ordered) {
    if (span.start < cursor || span.end > text.length) continue;
    if (span.start > cursor) {
      fragment.appendChild(document.createTextNode(text.slice(cursor, span.start)));
    }
    const mark = document.createElement("mark");
    mark.className = spanClass(span.kind);
    mark.dataset.key = span.canonical_key;
    mark.textContent = text.slice(span.start, span.end);
    fragment.appendChild(mark);
    cursor = span.end;
  }
  if (cursor < text.length) {
    fragment.appendChild(document.createTextNode(text.slice(cursor)));
  }
  return fragment;
}

export function spanClass(kind: Span["kind"]): string {
  switch (kind) {
    case "criterion":
      return "hl-criterion";
    case "option":
      return "hl-option";
    default:
      return "hl-mention";
  }
}
