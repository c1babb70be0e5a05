// webnav labeler v1
//
// Enumerates visible interactive elements, draws numbered badges over them,
// and returns the label map as a JSON string. Shared by the CDP driver and
// the browser extension; both must emit byte-identical maps.
(function (options) {
  'use strict';
  var MAX_TEXT = options.maxText;
  var OVERLAY_ID = options.overlayId;
  var SELECTOR = options.selector;
  var BASE_SELECTOR = options.baseSelector;

  var old = document.getElementById(OVERLAY_ID);
  if (old) {
    old.remove();
  }

  function normalize(raw) {
    var collapsed = String(raw || '').split(/\s+/).filter(Boolean).join(' ');
    var chars = Array.from(collapsed);
    if (chars.length > MAX_TEXT) {
      collapsed = chars.slice(0, MAX_TEXT).join('').replace(/\s+$/, '');
    }
    return collapsed;
  }

  function accessibleText(el) {
    var isPassword = el.tagName === 'INPUT' && (el.getAttribute('type') || '').toLowerCase() === 'password';
    var sources = [
      el.getAttribute('aria-label'),
      el.innerText,
      isPassword ? null : (typeof el.value === 'string' ? el.value : null),
      el.getAttribute('placeholder'),
      el.getAttribute('title'),
      el.getAttribute('alt')
    ];
    for (var i = 0; i < sources.length; i++) {
      if (sources[i] == null) continue;
      var t = normalize(sources[i]);
      if (t) return t;
    }
    return '';
  }

  function roleOf(el) {
    var role = (el.getAttribute('role') || '').trim().split(/\s+/)[0];
    return role ? role.toLowerCase() : el.tagName.toLowerCase();
  }

  function plainId(id) {
    return /^[A-Za-z][A-Za-z0-9_-]*$/.test(id);
  }

  function cssPath(el) {
    var parts = [];
    while (el && el.nodeType === 1) {
      if (el === document.body) {
        parts.unshift('body');
        break;
      }
      var id = el.getAttribute('id');
      if (id && plainId(id) && document.querySelectorAll('#' + id).length === 1) {
        parts.unshift('#' + id);
        break;
      }
      var k = 1;
      for (var sib = el.previousElementSibling; sib; sib = sib.previousElementSibling) {
        if (sib.tagName === el.tagName) k++;
      }
      parts.unshift(el.tagName.toLowerCase() + ':nth-of-type(' + k + ')');
      el = el.parentElement;
    }
    return parts.join(' > ');
  }

  function tabindexOk(el) {
    var raw = el.getAttribute('tabindex');
    if (el.matches(BASE_SELECTOR)) return true;
    if (raw === null) return false;
    var m = /^\s*([+-]?)(\d+)/.exec(raw);
    if (!m) return false;
    return m[1] !== '-' || /^0+$/.test(m[2]);
  }

  function visible(el, r) {
    if (!(r.width > 0 && r.height > 0)) return false;
    if (r.x >= window.innerWidth || r.x + r.width <= 0) return false;
    if (r.y >= window.innerHeight || r.y + r.height <= 0) return false;
    var cs = window.getComputedStyle(el);
    return cs.display !== 'none' && cs.visibility !== 'hidden' && parseFloat(cs.opacity) > 0;
  }

  var elements = [];
  var nodes = document.querySelectorAll(SELECTOR);
  for (var i = 0; i < nodes.length; i++) {
    var el = nodes[i];
    if (!tabindexOk(el)) continue;
    var r = el.getBoundingClientRect();
    if (!visible(el, r)) continue;
    elements.push({
      number: elements.length + 1,
      role: roleOf(el),
      text: accessibleText(el),
      rect: { x: r.x, y: r.y, width: r.width, height: r.height },
      selector: cssPath(el)
    });
  }

  var overlay = document.createElement('div');
  overlay.id = OVERLAY_ID;
  overlay.setAttribute('style', 'position:absolute;left:0;top:0;width:0;height:0;' +
    'z-index:2147483647;pointer-events:none;');
  for (var j = 0; j < elements.length; j++) {
    var e = elements[j];
    var badge = document.createElement('div');
    badge.textContent = String(e.number);
    badge.setAttribute('style', 'position:absolute;' +
      'left:' + (e.rect.x + window.scrollX) + 'px;top:' + (e.rect.y + window.scrollY) + 'px;' +
      'outline:2px solid #d00;background:#d00;color:#fff;font:bold 12px monospace;' +
      'padding:0 3px;pointer-events:none;');
    overlay.appendChild(badge);
  }
  document.documentElement.appendChild(overlay);

  return JSON.stringify({
    url: location.href,
    captured_at: new Date().toISOString(),
    elements: elements
  });
})
