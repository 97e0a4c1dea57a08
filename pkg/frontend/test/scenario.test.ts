// Scripted browsing sessions against a live service process. The tests
// drive the same view-model the DOM renderer consumes, so every assertion
// below is about what the pane would show.

import assert from "node:assert/strict";
import { after, before, test } from "node:test";
import { spawn, ChildProcess } from "node:child_process";
import { createServer } from "node:net";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve, dirname } from "node:path";
import { fileURLToPath } from "node:url";

import { ApiClient, SessionView } from "../src/api.js";
import { App } from "../src/app.js";

const here = dirname(fileURLToPath(import.meta.url));
const repoRoot = resolve(here, "..", "..", "..");
const dataDir = join(repoRoot, "src", "outofturn", "data");

function readJson(name: string): unknown {
  return JSON.parse(readFileSync(join(dataDir, name), "utf-8"));
}

function readTraceEvents(name: string): unknown[] {
  return readFileSync(join(dataDir, name), "utf-8")
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line) => JSON.parse(line));
}

function freePort(): Promise<number> {
  return new Promise((resolvePort, reject) => {
    const server = createServer();
    server.listen(0, "127.0.0.1", () => {
      const address = server.address();
      if (address && typeof address === "object") {
        const port = address.port;
        server.close(() => resolvePort(port));
      } else {
        reject(new Error("no port assigned"));
      }
    });
  });
}

let service: ChildProcess;
let base: string;
let client: ApiClient;

before(async () => {
  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  const stateDir = mkdtempSync(join(tmpdir(), "outofturn-ui-test-"));
  service = spawn(
    "python3",
    ["-m", "outofturn.cli", "serve", "--port", String(port), "--data-dir", stateDir],
    { cwd: repoRoot, stdio: ["ignore", "pipe", "pipe"] },
  );
  const deadline = Date.now() + 30_000;
  for (;;) {
    try {
      const response = await fetch(`${base}/sites`);
      if (response.ok) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      throw new Error("service did not come up within 30s");
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  client = new ApiClient(base);
  await client.installSite(readJson("camera.site"));
  await client.installSite(readJson("bookstore.site"));
});

after(() => {
  service.kill("SIGTERM");
});

test("out-of-turn SLR removes the Canon link; unknown term warns and leaves the pane unchanged", async () => {
  const app = new App(new ApiClient(base));
  await app.loadSites();
  app.state.selectedSite = "camera";
  await app.start();

  assert.equal(app.state.view, "session");
  assert.deepEqual(app.links(), ["Canon", "Nikon", "Minolta"]);

  await app.submitTerms("SLR");
  assert.deepEqual(app.links(), ["Nikon", "Minolta"]);
  assert.ok(app.state.session!.eliminated.includes("root/maker=Canon"));

  const paneBefore = app.state.session!.page;
  await app.submitTerms("warranty: 1 year");
  assert.deepEqual(app.state.warnings, ["unrecognized term: warranty: 1 year"]);
  assert.deepEqual(app.state.session!.page, paneBefore);
});

test("empty toolbar input sends no request", async () => {
  const api = new ApiClient(base);
  const app = new App(api);
  app.state.selectedSite = "camera";
  await app.start();
  const sent = api.requestCount;
  await app.submitTerms("   ");
  await app.submitTerms(" , ,");
  assert.equal(api.requestCount, sent);
});

test("contradicting input shows a banner with the derivation chain and keeps state", async () => {
  const app = new App(new ApiClient(base));
  app.state.selectedSite = "camera";
  await app.start();
  await app.submitTerms("SLR");
  const before = app.edgeVariables();

  await app.submitTerms("APS");
  assert.ok(app.state.banner, "banner expected");
  assert.ok(app.state.banner!.chain.length > 0);
  assert.deepEqual(app.edgeVariables(), before);
});

test("clicking through to a leaf completes the session and offers content", async () => {
  const app = new App(new ApiClient(base));
  app.state.selectedSite = "camera";
  await app.start();
  await app.clickEdge("maker=Nikon");
  assert.deepEqual(app.links(), ["35mm", "APS", "SLR"]);
  await app.clickEdge("type=SLR");
  assert.equal(app.state.session!.status, "completed");
  assert.equal(app.state.session!.page!.content!.ref, "nikon-slr");
  app.restart();
  assert.equal(app.state.view, "start");
});

test("choices inspector reflects the specialized program", async () => {
  const app = new App(new ApiClient(base));
  app.state.selectedSite = "camera";
  await app.start();
  await app.submitTerms("SLR");
  await app.inspect("maker");
  assert.deepEqual(app.state.inspector!.values, ["Nikon", "Minolta"]);
  await app.inspect("type");
  assert.deepEqual(app.state.inspector!.values, ["SLR"]);
});

test("save then resume reproduces the same pane", async () => {
  const app = new App(new ApiClient(base));
  app.state.selectedSite = "camera";
  await app.start();
  await app.submitTerms("SLR");
  const pane = app.state.session!.page;
  await app.save();
  assert.equal(app.state.session!.status, "saved");
  await app.resume();
  assert.equal(app.state.session!.status, "active");
  assert.deepEqual(app.state.session!.page, pane);
});

test("template picker starts a pre-specialized session", async () => {
  await client.deriveTemplates("bookstore", {
    theory: readJson("bookstore.theory"),
    traces: readTraceEvents("returning-reader.trace"),
  });
  const app = new App(new ApiClient(base));
  await app.loadTemplates("bookstore");
  const personal = app.state.templates.find(
    (t) => t.user === "reader-1" && Object.keys(t.baked_slots).length === 2
      && Object.keys(t.baked).length === 0,
  );
  assert.ok(personal, "expected the per-user forms-baked template");
  app.state.selectedTemplate = personal!.name;
  app.state.user = "reader-1";
  await app.start();
  // Payment and shipping are already known; the pane offers the book choice.
  assert.deepEqual(app.edgeVariables(), ["genre=mystery", "genre=science"]);

  // The same template under the wrong user is refused by the service.
  const intruder = new App(new ApiClient(base));
  await intruder.loadTemplates("bookstore");
  intruder.state.selectedTemplate = personal!.name;
  intruder.state.user = "someone-else";
  await intruder.start();
  assert.match(intruder.state.error, /scope-mismatch/);
});

test("stateless rendering: a bare session id reproduces the view", async () => {
  const app = new App(new ApiClient(base));
  app.state.selectedSite = "camera";
  await app.start();
  await app.submitTerms("SLR");
  const sid = app.state.session!.session_id;

  const reattached = new App(new ApiClient(base));
  reattached.state.view = "session";
  reattached.state.session = { session_id: sid } as SessionView;
  await reattached.refresh();
  assert.deepEqual(reattached.state.session!.page, app.state.session!.page);
});
