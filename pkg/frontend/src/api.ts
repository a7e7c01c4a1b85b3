// Thin client for the generation service.  All modeling happens server
// side; this module only moves JSON.
//
// Generation calls share a ticket counter so at most one response is ever
// acted on: whoever resolves after a newer request has started is dropped
// and comes back as null.

import {
    GenerationDoc,
    JobDoc,
    ModelInfo,
    ReharmonizeRequest,
    SampleRequest,
} from "./types.js";

export class ServiceError extends Error {
    readonly status: number;
    readonly code: string;

    constructor(status: number, code: string, message: string) {
        super(message);
        this.status = status;
        this.code = code;
    }
}

const sleep = (millis: number) => new Promise(resolve => setTimeout(resolve, millis));

export class ServiceClient {
    private base: string;
    private ticket = 0;

    constructor(base = "") {
        this.base = base.replace(/\/$/, "");
    }

    async listModels(): Promise<ModelInfo[]> {
        const doc = await this.decode(await fetch(`${this.base}/models`));
        return (doc as { models: ModelInfo[] }).models;
    }

    sample(modelId: string, body: SampleRequest): Promise<GenerationDoc | null> {
        return this.generate(`/models/${modelId}/sample`, body);
    }

    reharmonize(modelId: string, body: ReharmonizeRequest): Promise<GenerationDoc | null> {
        return this.generate(`/models/${modelId}/reharmonize`, body);
    }

    async submitTrain(body: { corpus: unknown, config: unknown }): Promise<JobDoc> {
        const res = await fetch(`${this.base}/jobs/train`, this.post(body));
        return await this.decode(res) as JobDoc;
    }

    async jobStatus(jobId: string): Promise<JobDoc> {
        return await this.decode(await fetch(`${this.base}/jobs/${jobId}`)) as JobDoc;
    }

    /** Poll a job until it leaves the queue, ~twice a second. */
    async waitForJob(jobId: string, pollMillis = 500): Promise<JobDoc> {
        for (;;) {
            const job = await this.jobStatus(jobId);
            if (job.status === "done" || job.status === "failed") return job;
            await sleep(pollMillis);
        }
    }

    private async generate(path: string, body: unknown): Promise<GenerationDoc | null> {
        const ticket = ++this.ticket;
        try {
            const res = await fetch(this.base + path, this.post(body));
            const doc = await this.decode(res) as GenerationDoc;
            return ticket === this.ticket ? doc : null;
        } catch (err) {
            if (ticket !== this.ticket) return null;  // stale failure, nobody cares
            throw err;
        }
    }

    private post(body: unknown): RequestInit {
        return {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify(body),
        };
    }

    private async decode(res: Response): Promise<unknown> {
        let doc: unknown = undefined;
        try {
            doc = await res.json();
        } catch {
            // fall through; res.ok decides whether this is fatal
        }
        if (!res.ok) {
            const body = (doc ?? {}) as { error?: string, message?: string };
            throw new ServiceError(res.status, body.error ?? `http_${res.status}`,
                body.message ?? `request failed with status ${res.status}`);
        }
        if (doc === undefined) {
            throw new ServiceError(res.status, "bad_body", "response body is not JSON");
        }
        return doc;
    }
}
